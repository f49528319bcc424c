"""Contact schedules, QP solver, horizon controller and whole-body controller."""
