"""Symmetry breaking by 2-colourings on layered graph truncations."""
