"""SLA offer tables and the coefficients JSON file."""

import csv
import io
import json
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

from ..core import COEFFICIENT_NAMES, Metric, SlaModel, SlaOffer
from .surface import predict

MODELS_FORMAT_VERSION = 1


def sla_table(models: Mapping[Metric, SlaModel], n: int, p_options: Sequence[int]) -> List[SlaOffer]:
    """
    One offer per proxy count, in the order given.

    Args:
        models: Fitted surface per metric; all three are required.
        n: Client count the offers are evaluated at.
        p_options: Proxy counts to offer.

    Returns:
        Offers with minimum throughput and maximum latencies at (p, n).

    Raises:
        ValueError: A metric has no model.
    """
    missing = [m.value for m in Metric if m not in models]
    if missing:
        raise ValueError(f"Missing SLA models for: {', '.join(missing)}")
    return [
        SlaOffer(
            p=p,
            n_max=n,
            t_min=predict(models[Metric.THROUGHPUT], p, n),
            l_r_max=predict(models[Metric.READ_LATENCY], p, n),
            l_w_max=predict(models[Metric.WRITE_LATENCY], p, n),
        )
        for p in p_options
    ]


def render_text(offers: Sequence[SlaOffer]) -> str:
    if not offers:
        return ""
    blocks = []
    for number, offer in enumerate(offers, start=1):
        blocks.append("\n".join([
            f"Option {number}: P={offer.p} proxies, up to N={offer.n_max} clients",
            f"  Guaranteed average throughput up to {offer.t_min:.3f} ops/sec",
            f"  Maximum average read latency    {offer.l_r_max:.3f} µs",
            f"  Maximum average write latency   {offer.l_w_max:.3f} µs",
        ]))
    return "\n\n".join(blocks) + "\n"


def render_csv(offers: Sequence[SlaOffer]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["p", "n_max", "t_min_ops", "l_r_max_us", "l_w_max_us"])
    for offer in offers:
        writer.writerow([offer.p, offer.n_max, f"{offer.t_min:.3f}", f"{offer.l_r_max:.3f}", f"{offer.l_w_max:.3f}"])
    return buffer.getvalue()


def models_to_dict(models: Mapping[Metric, SlaModel]) -> Dict:
    return {
        "format_version": MODELS_FORMAT_VERSION,
        "models": {metric.value: model.named() for metric, model in models.items()},
    }


def models_from_dict(data: Dict) -> Dict[Metric, SlaModel]:
    version = data.get("format_version", MODELS_FORMAT_VERSION)
    if version > MODELS_FORMAT_VERSION:
        raise ValueError(f"Unsupported coefficients format version {version}")
    models = {}
    for name, named in data.get("models", {}).items():
        metric = Metric(name)
        missing = [c for c in COEFFICIENT_NAMES if c not in named]
        if missing:
            raise ValueError(f"Model {name} lacks coefficients {', '.join(missing)}")
        models[metric] = SlaModel(metric, tuple(float(named[c]) for c in COEFFICIENT_NAMES))
    return models


def save_models(models: Mapping[Metric, SlaModel], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(models_to_dict(models), f, indent=2)


def load_models(path: Union[str, Path]) -> Dict[Metric, SlaModel]:
    with open(path, "r", encoding="utf-8") as f:
        return models_from_dict(json.load(f))
