# Numerical services: generators, shock dynamics, duality checks and Monte Carlo
