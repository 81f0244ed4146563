"""Protocol execution engine."""
from .core import (Action, DecisionPoint, Event, Honest, Move, Outcome, Protocol, Scripted,
                   Silent, Strategy, Trace, Underfunded)
from .protocols import (AtomicSwap, Future, HtlcPayment, Swaption, run_atomic_swap,
                        run_htlc_payment, run_margin_swaption, run_swaption,
                        run_swaption_with_cancellation)
from .runner import DepthExceeded, RoundLimit, execute, explore, replay, solve
from .safety import (Guarantee, SafetyReport, Violation, cheat_guarantee, check_safety,
                     enumerate_strategies, swap_guarantee, swaption_guarantee)
