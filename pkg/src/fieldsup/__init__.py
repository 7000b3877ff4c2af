"""Supervisory-control workbench for heterogeneous field robot teams.

Layers: finite-state automata and their language operations; supervisor
synthesis (supremal controllable sublanguages, modular pipeline); hybrid
plant models of a UAV/UGV team; continuous dynamics and swarm control; the
event-driven closed-loop executor; and scenario configurations with a CLI.
"""

__version__ = "0.1.0"
