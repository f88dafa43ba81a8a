"""Bounded model checking for MJB bytecode programs."""

__version__ = "0.1.0"
