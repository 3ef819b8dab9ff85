"""Linear-elastic interacting particles: simulation, likelihood, estimation and bounds."""
