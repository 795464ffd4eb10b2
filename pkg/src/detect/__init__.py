from .events import DETECTED, UNDETECTED, DetectionEvent
from .splitguard import (
    FakeBatchSchedule,
    SgState,
    SplitGuardDetector,
    class_signature,
    sg_fake_batch,
    sg_score,
    sg_update,
)
from .scrutinizer import GradientScrutinizer, GsState, gs_score, gs_update
from .grad_profile import (
    GradNormDetector,
    GradNormProfile,
    compare_profiles,
    grad_norm_profile,
    ks_critical_value,
)
