"""Inertial dynamics with Hessian-driven damping."""
