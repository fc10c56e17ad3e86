"""Information-theoretic LGD modelling under proxy-contaminated labels."""
