"""Ramp-metering evacuation planning with LP, sensitivity analysis and robust control."""
