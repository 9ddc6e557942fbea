"""Discrete-event MANET routing simulator and benchmark harness.

Implements DSDV, AODV, DSR and ZRP on top of a deterministic event engine
with random-waypoint mobility, a unit-disk CSMA medium and CBR traffic.
"""

__version__ = "0.1.0"
