"""Polytopal discretizations of the clamped biharmonic problem in 2D."""
