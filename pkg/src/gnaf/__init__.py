"""Simulation and analysis toolkit for the GNAF cooperative relay protocol."""
