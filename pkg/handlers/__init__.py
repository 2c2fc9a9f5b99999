"""
Handlers package for the energy-Casimir reduction toolkit.
"""

from handlers.pipeline import (
    reduce_command,
    solve_command,
    minimize_command,
    lift_command,
    rearrange_command,
)

from handlers.verify import (
    verify_command,
    sweep_command,
)

__all__ = [
    # Pipeline handlers
    'reduce_command',
    'solve_command',
    'minimize_command',
    'lift_command',
    'rearrange_command',
    # Verification handlers
    'verify_command',
    'sweep_command',
]
