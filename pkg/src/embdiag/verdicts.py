"""Verdict lattice shared by all diagnostic checks.

Certified verdicts are reserved for analytic arguments (closed-form
ratios, doubling weights, preset certificates); sampled numeric trends
can only ever support a verdict.
"""

from dataclasses import dataclass, field

COMPACT_CERTIFIED = "CompactCertified"
COMPACT_SUPPORTED = "CompactSupported"
NONCOMPACT_CERTIFIED = "NonCompactCertified"
NONCOMPACT_SUPPORTED = "NonCompactSupported"
INCONCLUSIVE = "Inconclusive"

ALL_VERDICTS = (COMPACT_CERTIFIED, COMPACT_SUPPORTED, NONCOMPACT_CERTIFIED,
                NONCOMPACT_SUPPORTED, INCONCLUSIVE)

_COMPACT_SIDE = {COMPACT_CERTIFIED: "compact", COMPACT_SUPPORTED: "compact",
                 NONCOMPACT_CERTIFIED: "noncompact",
                 NONCOMPACT_SUPPORTED: "noncompact"}
_CERTIFIED = {COMPACT_CERTIFIED, NONCOMPACT_CERTIFIED}


# Fixed anchor table: every evidence entry names the mathematical result
# its check implements.
CHECK_ANCHORS = {
    "admissibility": "local integrability of w^(-1/(p-1)) (space well-defined)",
    "fat_cube_scan": "finiteness of fat cubes in every tesselation (necessary)",
    "thin_chain": "thin-cube mass-doubling chain construction",
    "finite_volume": "finite weighted volume for bounded weights (necessary)",
    "tail_decay": "tail-vs-shell weighted mass decay (necessary)",
    "surface_ratio": "vanishing surface-area ratio at infinity (necessary)",
    "exponential_decay": "super-exponential weighted tail decay (necessary)",
    "subgraph_lift": "isometric lift into the weight subgraph (sufficient route)",
    "flow_certificate": "flow compactness certificate (sufficient)",
    "equivalence": "two-sided weight equivalence transfer",
    "spectral_probe": "discrete-spectrum corroboration (oracle, never certified)",
    "npc": "nonlinear principal components of the weighted Neumann problem",
}


def side(verdict):
    return _COMPACT_SIDE.get(verdict)


def is_certified(verdict):
    return verdict in _CERTIFIED


@dataclass
class CheckOutcome:
    """One executed check: its verdict contribution and evidence payload."""

    check: str
    verdict: object = None          # one of ALL_VERDICTS or None
    summary: str = ""
    details: dict = field(default_factory=dict)
    artifacts: tuple = ()           # file names written alongside the report
    error: str = ""

    @property
    def anchor(self):
        return CHECK_ANCHORS[self.check]


@dataclass
class DiagnosticVerdict:
    """Aggregate verdict with its full evidence trail.

    ``conflicts`` lists contradictory certified pairs; it must stay empty
    in a sound run, and a nonempty list forces the overall verdict to
    Inconclusive with the soundness alarm raised.
    """

    overall: str
    evidence: list
    conflicts: list = field(default_factory=list)
    alarm: bool = False


def combine(evidence):
    """Least upper bound of the evidence verdicts.

    Certified beats supported; contradictory certified verdicts raise the
    soundness alarm and collapse to Inconclusive; contradictory supported
    verdicts collapse to Inconclusive without the alarm.
    """
    verdicts = [e.verdict for e in evidence if e.verdict]
    cert_compact = [e for e in evidence if e.verdict == COMPACT_CERTIFIED]
    cert_noncompact = [e for e in evidence if e.verdict == NONCOMPACT_CERTIFIED]
    conflicts = []
    if cert_compact and cert_noncompact:
        for a in cert_compact:
            for b in cert_noncompact:
                conflicts.append((a.check, b.check))
        return DiagnosticVerdict(INCONCLUSIVE, list(evidence), conflicts, True)
    if cert_compact:
        return DiagnosticVerdict(COMPACT_CERTIFIED, list(evidence))
    if cert_noncompact:
        return DiagnosticVerdict(NONCOMPACT_CERTIFIED, list(evidence))
    sides = {side(v) for v in verdicts if side(v)}
    if sides == {"compact"}:
        return DiagnosticVerdict(COMPACT_SUPPORTED, list(evidence))
    if sides == {"noncompact"}:
        return DiagnosticVerdict(NONCOMPACT_SUPPORTED, list(evidence))
    return DiagnosticVerdict(INCONCLUSIVE, list(evidence))
