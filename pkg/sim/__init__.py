"""Physics plant used to close the loop around the controllers."""
