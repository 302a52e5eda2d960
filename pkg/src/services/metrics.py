from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, generate_latest

from src.config import settings
from src.logging_config import get_logger

logger = get_logger(__name__)

registry = CollectorRegistry()

train_iterations = Counter(
    "ebm_train_iterations", "Total optimizer steps taken", registry=registry
)
noise_refreshes = Counter(
    "ebm_noise_refreshes", "Total frozen-noise refreshes", registry=registry
)
sampler_divergences = Counter(
    "ebm_sampler_divergences", "Total runs halted by sampler divergence", registry=registry
)
langevin_nu = Gauge(
    "ebm_langevin_nu", "Mean score norm along the latest negative-sample chains", registry=registry
)
buffer_size = Gauge("ebm_buffer_size", "Points held by the replay buffer", registry=registry)


def write_exposition(path: str | Path) -> Path | None:
    """Write the registry in text exposition format; no-op when metrics are disabled."""
    if not settings.METRICS_ENABLED:
        return None
    path = Path(path)
    path.write_bytes(generate_latest(registry))
    logger.debug("Metrics written", path=str(path))
    return path
