"""Coded transceiver chain and BER experiment engine."""

from .coding import (
    conv_encode,
    coded_length,
    info_length,
    interleaver,
    viterbi_decode,
    viterbi_decode_batch,
)
from .detection import iterative_detect, mrt_precode, project_receive, zf_equalize
from .engine import (
    BerCurve,
    LinkScenario,
    PrecoderSpec,
    build_precoder,
    run_link,
    snr_at_ber,
)
from .mapping import (
    Constellation,
    Mcs,
    get_constellation,
    hard_decision,
    llr_demap,
    qam_map,
    soft_symbols,
)
