"""Evaluation metrics over manifests and prediction files.

Per (target i, correlate j) pairing and dataset sample s the harness
computes the mean per-class test accuracy ``acc[i,j][s]``. Aggregations:

* ``P[i,j]``     expectation of acc over the dataset samples, with a
  standard error ``sd / sqrt(n_samples)``.
* ``P[i]``       single-factor form for no-shortcut studies.
* ``FAAvg[i]``   expectation over samples of the *mean* accuracy across
  the target's pairings; ``FAMin[i]`` uses the minimum instead. The
  mean/min is taken inside each sample, then averaged over samples.
* ``d[i,j]``     relative shortcut drop ``(a_i - mean_s c[i,j][s]) / a_i``
  where a_i is the no-shortcut accuracy of factor i and c the accuracy
  under correlation violation.
* ``SCV``        per-factor mean and max of d over the correlates.

All accuracies are macro (per-class) averages, which coincides with
plain accuracy on balanced test splits but not on custom unbalanced ones.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

from .dataset_io import DatasetManifest, PredictionFile
from .errors import ConfigurationError
from .factors import FACTORS

REPORT_SCHEMA = "factorbench-report/1"


def mean_per_class_accuracy(records, predictions, expected_classes=None) -> float:
    """Macro average of per-class accuracy over the target classes.

    ``records`` yields (id, true class) pairs (ManifestRecord works too);
    ``predictions`` maps id -> predicted class and must cover every record.
    ``expected_classes`` lists the classes that must be present; it
    defaults to all of 0..2. Studies whose test mask reaches only a subset
    of classes (the hybrid pattern) pass that subset.
    """
    if isinstance(predictions, PredictionFile):
        predictions = predictions.as_dict()
    pairs = []
    for rec in records:
        rid, target = (rec.id, rec.target) if hasattr(rec, "id") else rec
        pairs.append((rid, int(target)))
    if not pairs:
        raise ConfigurationError("no test records to score")
    expected = list(expected_classes) if expected_classes is not None else [0, 1, 2]

    totals = defaultdict(int)
    hits = defaultdict(int)
    for rid, target in pairs:
        if rid not in predictions:
            raise ConfigurationError(f"missing prediction for id {rid}")
        totals[target] += 1
        hits[target] += int(predictions[rid] == target)

    absent = [c for c in expected if totals[c] == 0]
    if absent:
        raise ConfigurationError(f"target classes absent from test records: {absent}")
    return sum(hits[c] / totals[c] for c in expected) / len(expected)


def aggregate(values) -> tuple:
    """(mean, standard error) over per-sample values; se uses sd/sqrt(n)."""
    vals = [float(v) for v in values]
    if not vals:
        raise ConfigurationError("nothing to aggregate")
    mean = sum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var) / math.sqrt(len(vals))


def faavg(acc_by_correlate: dict) -> float:
    """E over samples of the mean across correlates.

    ``acc_by_correlate`` maps correlate -> list of per-sample accuracies;
    the lists must be aligned (same sample order and length).
    """
    per_sample = _per_sample_rows(acc_by_correlate)
    return sum(sum(row) / len(row) for row in per_sample) / len(per_sample)


def famin(acc_by_correlate: dict) -> float:
    """E over samples of the minimum across correlates."""
    per_sample = _per_sample_rows(acc_by_correlate)
    return sum(min(row) for row in per_sample) / len(per_sample)


def _per_sample_rows(acc_by_correlate: dict) -> list:
    if not acc_by_correlate:
        raise ConfigurationError("no pairings to aggregate over")
    lengths = {len(v) for v in acc_by_correlate.values()}
    if len(lengths) != 1:
        raise ConfigurationError(
            f"pairings have unequal sample counts {sorted(lengths)}"
        )
    n = lengths.pop()
    if n == 0:
        raise ConfigurationError("no samples to aggregate over")
    correlates = sorted(acc_by_correlate, key=str)
    return [[acc_by_correlate[j][s] for j in correlates] for s in range(n)]


def shortcut_drop(a_i: float, violation_accs) -> float:
    """Relative drop of factor accuracy under correlation violation.

    ``violation_accs`` are the per-sample violation accuracies; the drop
    is taken against their mean. Undefined (NaN) when a_i == 0.
    """
    vals = [float(v) for v in violation_accs]
    if not vals:
        raise ConfigurationError("no violation accuracies")
    if a_i == 0:
        return float("nan")
    return (a_i - sum(vals) / len(vals)) / a_i


def scv(drops) -> tuple:
    """(mean, max) shortcut vulnerability over a factor's drops."""
    vals = [float(d) for d in drops]
    if not vals:
        raise ConfigurationError("no drops to aggregate")
    if any(math.isnan(v) for v in vals):
        return float("nan"), float("nan")
    return sum(vals) / len(vals), max(vals)


# ---------------------------------------------------------------------------
# Report assembly


@dataclass
class MetricsReport:
    study: str
    #: pairing "target:correlate" -> ordered per-sample accuracies
    per_sample: dict = field(default_factory=dict)
    #: pairing -> (P, se)
    p_pair: dict = field(default_factory=dict)
    #: target factor -> (P, se) for single-factor studies
    p_factor: dict = field(default_factory=dict)
    faavg: dict = field(default_factory=dict)
    famin: dict = field(default_factory=dict)
    drop: dict = field(default_factory=dict)
    scv_mean: dict = field(default_factory=dict)
    scv_max: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        def pair_map(d):
            return {k: v for k, v in sorted(d.items())}

        return {
            "schema": REPORT_SCHEMA,
            "study": self.study,
            "per_sample": pair_map(self.per_sample),
            "P": {k: v[0] for k, v in sorted(self.p_pair.items())},
            "P_se": {k: v[1] for k, v in sorted(self.p_pair.items())},
            "P_factor": {k: v[0] for k, v in sorted(self.p_factor.items())},
            "P_factor_se": {k: v[1] for k, v in sorted(self.p_factor.items())},
            "FAAvg": pair_map(self.faavg),
            "FAMin": pair_map(self.famin),
            "shortcut_drop": {
                k: (None if v != v else v) for k, v in sorted(self.drop.items())
            },
            "SCV_mean": {
                k: (None if v != v else v) for k, v in sorted(self.scv_mean.items())
            },
            "SCV_max": {
                k: (None if v != v else v) for k, v in sorted(self.scv_max.items())
            },
            "notes": self.notes,
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def text_matrix(self) -> str:
        """Plain-text pairing matrix: rows are predicted factors, columns
        the correlated factors; the diagonal carries single-factor P."""
        labels = [f.label for f in FACTORS]
        width = max(9, max(len(l) for l in labels) + 1)
        lines = [" " * width + "".join(l.rjust(width) for l in labels)]
        for i in labels:
            cells = []
            for j in labels:
                if i == j:
                    p = self.p_factor.get(i)
                    cells.append(("-" if p is None else f"{p[0]:.3f}").rjust(width))
                else:
                    p = self.p_pair.get(f"{i}:{j}")
                    cells.append(("." if p is None else f"{p[0]:.3f}").rjust(width))
            lines.append(i.rjust(width) + "".join(cells))
        return "\n".join(lines)


def accuracy_for(manifest: DatasetManifest, predictions) -> float:
    """Mean per-class accuracy of one manifest's test split."""
    return mean_per_class_accuracy(
        manifest.records_for("test"),
        predictions,
        expected_classes=manifest.expected_test_classes(),
    )


def build_report(pairs, zso_report: dict | None = None) -> MetricsReport:
    """Assemble the full report from (manifest, predictions) pairs.

    Manifests are grouped by pairing; factor-aggregated quantities are
    computed where a target factor has at least one pairing. When a
    no-shortcut report is supplied, shortcut drops and vulnerabilities
    are computed against its per-factor accuracies.
    """
    if not pairs:
        raise ConfigurationError("no manifests to score")

    studies = set()
    by_pairing = defaultdict(list)  # (target, correlate) -> [(sample_id, acc)]
    zso_by_factor = defaultdict(list)
    for manifest, predictions in pairs:
        acc = accuracy_for(manifest, predictions)
        head = manifest.header
        studies.add(head["study"])
        key = (head["target"], head["correlate"])
        if head["study"] == "ZSO":
            zso_by_factor[head["target"]].append((head["sample_id"], acc))
        else:
            by_pairing[key].append((head["sample_id"], acc))

    report = MetricsReport(study="+".join(sorted(studies)))

    for (target, correlate), entries in by_pairing.items():
        accs = [a for _, a in sorted(entries)]
        report.per_sample[f"{target}:{correlate}"] = accs
        report.p_pair[f"{target}:{correlate}"] = aggregate(accs)

    for target, entries in zso_by_factor.items():
        accs = [a for _, a in sorted(entries)]
        report.per_sample[f"{target}"] = accs
        report.p_factor[target] = aggregate(accs)
        # A single-factor study is its own factor aggregation.
        report.faavg[target] = report.p_factor[target][0]
        report.famin[target] = report.p_factor[target][0]

    by_target = defaultdict(dict)
    for (target, correlate), entries in by_pairing.items():
        by_target[target][correlate] = [a for _, a in sorted(entries)]
    for target, acc_by_correlate in by_target.items():
        try:
            report.faavg[target] = faavg(acc_by_correlate)
            report.famin[target] = famin(acc_by_correlate)
        except ConfigurationError as exc:
            report.notes.append(f"factor aggregation skipped for {target}: {exc}")

    if zso_report is not None:
        a_by_factor = dict(zso_report.get("P_factor", {}))
        for target, acc_by_correlate in by_target.items():
            if target not in a_by_factor:
                report.notes.append(f"no ZSO accuracy for {target}; drops skipped")
                continue
            a_i = a_by_factor[target]
            drops = {}
            for correlate, accs in acc_by_correlate.items():
                d = shortcut_drop(a_i, accs)
                drops[correlate] = d
                report.drop[f"{target}:{correlate}"] = d
            mean_d, max_d = scv(drops.values())
            report.scv_mean[target] = mean_d
            report.scv_max[target] = max_d
            if a_i == 0:
                report.notes.append(
                    f"ZSO accuracy for {target} is 0; shortcut drop undefined"
                )

    return report
