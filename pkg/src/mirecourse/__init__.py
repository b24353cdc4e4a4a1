"""Recourse actions for instances with missing values."""
