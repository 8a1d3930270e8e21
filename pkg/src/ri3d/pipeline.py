"""Dataset-level glue: build a bank from a train split and evaluate a test split."""

from ri3d.bank import MemoryBank, build_bank, score_many
from ri3d.io import CategoryLayout, read_cloud
from ri3d.metrics import SampleResult, evaluate, regions_from_labels


def bank_for_category(cat: CategoryLayout, extractor, G: int, K: int, threads: int = 1) -> MemoryBank:
    if not cat.train:
        raise FileNotFoundError(f"category {cat.name!r} has no training clouds")
    clouds = [read_cloud(p) for p in cat.train]
    return build_bank(clouds, extractor, G, K, sample_ids=[p.stem for p in cat.train], threads=threads)


def score_category(cat: CategoryLayout, bank: MemoryBank, extractor, G: int, K: int,
                   threads: int = 1) -> list[SampleResult]:
    clouds = [read_cloud(p) for p in cat.test]
    reports = score_many(bank, clouds, extractor, G, K, threads=threads)
    results = []
    for path, cloud, rep in zip(cat.test, clouds, reports):
        gt = cat.ground_truth(path, len(cloud))
        results.append(SampleResult(
            name=path.stem,
            per_point_scores=rep.per_point_scores,
            object_score=rep.object_score,
            labels=gt.labels,
            regions=regions_from_labels(cloud, gt.labels, gt.region_ids),
        ))
    return results


def evaluate_category(cat: CategoryLayout, extractor, G: int, K: int, fpr_cap: float,
                      bank: MemoryBank | None = None, threads: int = 1, config: dict | None = None):
    if bank is None:
        bank = bank_for_category(cat, extractor, G, K, threads=threads)
    results = score_category(cat, bank, extractor, G, K, threads=threads)
    return evaluate(results, fpr_cap=fpr_cap, config=config), results
