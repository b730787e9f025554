"""HTTP API package for the rover ground station."""
