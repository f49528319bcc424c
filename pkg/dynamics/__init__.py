"""Rigid-body kinematics and dynamics used by the controllers and the plant."""
