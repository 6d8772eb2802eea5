"""Bell-inequality evaluation for quadrature measurements on few-photon states."""
