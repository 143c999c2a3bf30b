"""Convex day-ahead tertiary control for unbalanced three-phase microgrids."""
