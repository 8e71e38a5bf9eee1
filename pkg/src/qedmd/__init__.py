"""Density matrix downfolding with quantum-estimated observables: exact-diagonalization
testbeds, regression and verdict logic, projector simulation, error propagation and
fault-tolerant resource estimation."""

__version__ = "0.1.0"
