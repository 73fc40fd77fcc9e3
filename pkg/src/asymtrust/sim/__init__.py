"""Seeded discrete-event simulation of the protocol engines."""

from .runner import HorizonExhausted, Simulation, run
from .scenario import AdversarySpec, Rule, Scenario, Schedule, Strategy, ValidationError, schedule_policies
from .trace import Event, Trace, parse_trace
