"""k-inductive barrier certificates for quantum circuits via Hermitian sums of squares."""

from .cpoly import CPolynomial
from .qsystem import QSystem, Region, Schedule, UnitaryMode
from .synth import BarrierCertificate, Hyperparams, NoCertificate, synthesize
from .certify import ProofObligation, Verdict, interval_verify, obligations, sample_falsify

__all__ = [
    "CPolynomial", "QSystem", "Region", "Schedule", "UnitaryMode", "BarrierCertificate", "Hyperparams",
    "NoCertificate", "synthesize", "ProofObligation", "Verdict", "interval_verify", "obligations", "sample_falsify",
]
