"""Decision-feedback Slepian-Wolf compression for sources with hidden Markov correlation."""
from .codec import (
    CompressedStream,
    DecodeReport,
    FeedbackPolicy,
    FormatError,
    FrameConfig,
    column_permutation,
    decode,
    distortion,
    encode,
    frame,
    unframe,
)
from .hmm import (
    HmmModel,
    TwoStateParams,
    forward_update,
    from_two_state,
    marginal_zero_prob,
    named_model,
    predict_llr,
    sample,
    stationary_distribution,
)
from .ldpc import (
    DecodeResult,
    ParityCheckMatrix,
    build_irregular,
    build_regular,
    decode_syndrome_bp,
    syndrome,
)
from .limits import (
    EntropyCurve,
    RateParams,
    capacity,
    compression_rate,
    conditional_entropy_exact,
    conditional_entropy_mc,
    entropy_rate,
    fig3_curve,
)

__version__ = "0.1.0"
