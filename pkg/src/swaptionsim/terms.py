"""Economic and temporal parameters of the protocols."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


class InvalidTerms(ValueError):
    pass


@dataclass(frozen=True)
class SwapTerms:
    a_amount: int
    b_amount: int
    T: int = 10
    a_chain: str = "ACoin"
    b_chain: str = "BCoin"
    alice: str = "alice"
    bob: str = "bob"
    # Overrides exist only to build deliberately broken variants.
    a_expiry: Optional[int] = None
    b_expiry: Optional[int] = None

    def __post_init__(self):
        if self.a_amount <= 0 or self.b_amount <= 0:
            raise InvalidTerms("swap amounts must be positive")
        if self.T < 2:
            raise InvalidTerms("T must leave at least two timesteps of execution room")
        if self.alice == self.bob or self.a_chain == self.b_chain:
            raise InvalidTerms("parties and chains must be distinct")

    @property
    def a_lock(self) -> int:
        return self.T + 1 if self.a_expiry is None else self.a_expiry

    @property
    def b_lock(self) -> int:
        return self.T if self.b_expiry is None else self.b_expiry


@dataclass(frozen=True)
class SwaptionTerms:
    """One swaption between ``alice`` (funds on ``a_chain``) and ``bob`` (``b_chain``).

    ``buyer`` holds the option and pays the premium on their own chain. The
    funding-swap secret is always generated by ``alice``.
    """
    premium: int
    p_a: int
    p_b: int
    m_a: int = 0
    m_b: int = 0
    T: int = 10
    E: int = 100
    M: Optional[int] = None
    cancellable: bool = False
    margined: bool = False
    equal_ratio: bool = False
    buyer: str = "alice"
    a_chain: str = "ACoin"
    b_chain: str = "BCoin"
    alice: str = "alice"
    bob: str = "bob"
    delay: int = 1
    # Mutant switch: give the writer the earlier margin expiry.
    swap_margin_expiries: bool = False

    def __post_init__(self):
        if self.premium < 0:
            raise InvalidTerms("premium cannot be negative")
        if self.p_a <= 0 or self.p_b <= 0:
            raise InvalidTerms("principals must be positive")
        if self.alice == self.bob or self.a_chain == self.b_chain:
            raise InvalidTerms("parties and chains must be distinct")
        if self.buyer not in (self.alice, self.bob):
            raise InvalidTerms(f"buyer {self.buyer!r} is not a party")
        if self.T < 2:
            raise InvalidTerms("T must leave at least two timesteps of execution room")
        if self.E <= self.T + 1:
            raise InvalidTerms("swaption expiry must follow the funding swap")
        if self.delay < 1:
            raise InvalidTerms("anti-cheat delay must be at least one timestep")
        if self.margined:
            if self.cancellable:
                raise InvalidTerms("margined swaptions cannot be cancellable: the "
                                   "cancel/exercise children would have to be signed before "
                                   "the principal deposit txid is known")
            if not (0 < self.m_a < self.p_a and 0 < self.m_b < self.p_b):
                raise InvalidTerms("margins must be positive and below the principals")
            if not self.T + 1 < self.margin_expiry:
                raise InvalidTerms("margin expiry must follow the funding swap")
            if not self.margin_expiry + 1 < self.E:
                raise InvalidTerms("margin expiry must precede swaption expiry")
            if self.equal_ratio and Fraction(self.m_a, self.p_a) != Fraction(self.m_b, self.p_b):
                raise InvalidTerms("equal-ratio policy needs m_a/p_a == m_b/p_b")
        elif self.m_a or self.m_b:
            raise InvalidTerms("margins given but margined flag not set")
        elif self.M is not None and not self.M + 1 < self.E:
            raise InvalidTerms("margin expiry must precede swaption expiry")

    @property
    def margin_expiry(self) -> int:
        return self.E - 2 if self.M is None else self.M

    @property
    def writer(self) -> str:
        return self.bob if self.buyer == self.alice else self.alice

    def chain_of(self, party: str) -> str:
        return self.a_chain if party == self.alice else self.b_chain

    def principal_of(self, party: str) -> int:
        return self.p_a if party == self.alice else self.p_b

    def margin_of(self, party: str) -> int:
        return self.m_a if party == self.alice else self.m_b

    def margin_expiry_of(self, party: str) -> int:
        first = self.buyer
        if self.swap_margin_expiries:
            first = self.writer
        return self.margin_expiry if party == first else self.margin_expiry + 1

    def lock_of(self, party: str) -> int:
        """What ``party`` puts into the funding swap."""
        base = self.margin_of(party) if self.margined else self.principal_of(party)
        return base + (self.premium if party == self.buyer else 0)
