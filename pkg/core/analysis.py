"""
One pass of the security analysis: tally -> decoy bounds -> AOPP chain -> key rate.
"""
import logging
from typing import Optional

from config.settings import config
from core.aopp import aopp_chain, aopp_simulate, expected_aopp
from core.decoy import decoy_bounds
from core.exceptions import AnalysisInfeasibleError
from core.keyrate import key_rate
from core.tally import sifted_from_tally
from models.params import ChannelModel, ProtocolParams
from models.results import AnalysisResult, AoppOutcome
from models.tally import SiftedKeys, SourceTally

logger = logging.getLogger(__name__)


def analyze(tally: SourceTally, params: ProtocolParams, channel: Optional[ChannelModel] = None,
            sifted: Optional[SiftedKeys] = None, outcome: Optional[AoppOutcome] = None,
            form: Optional[str] = None, n01_uses_s10: bool = False,
            seed: Optional[int] = None, finite: bool = True) -> AnalysisResult:
    """Run the whole chain and return every intermediate.

    The pairing statistics come from `outcome` when given, from the bit strings
    when `sifted` carries them, and otherwise from their expected values.
    Infeasible statistics give a zero-key report with the reason instead of an
    exception.
    """
    form = form or config.CHERNOFF_FORM
    sifted = sifted or sifted_from_tally(tally)
    estimates = decoy_bounds(tally, params, form=form, n01_uses_s10=n01_uses_s10, finite=finite)

    chain = None
    reason = None
    if tally.total_heralded <= 0 or sifted.n_t <= 0:
        reason = "no effective events"
    else:
        if outcome is None:
            if sifted.has_strings:
                outcome = aopp_simulate(sifted.z_a, sifted.z_b, seed)
            else:
                outcome = expected_aopp(sifted)
        if outcome.n_g <= 0 or outcome.n_odd <= 0:
            reason = "no odd-parity pairs for AOPP"
        else:
            try:
                chain = aopp_chain(estimates, sifted, outcome.n_g, outcome.n_odd, params,
                                   outcome=outcome, form=form)
            except AnalysisInfeasibleError as exc:
                reason = str(exc)

    if reason:
        logger.debug("Zero key: %s", reason)
    report = key_rate(chain, params, channel, reason=reason)
    return AnalysisResult(
        estimates=estimates,
        sifted=sifted,
        outcome=outcome,
        chain=chain,
        report=report,
        chernoff_form=form,
        n01_uses_s10=n01_uses_s10,
    )
