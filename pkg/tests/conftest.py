import os
from pathlib import Path

import numpy as np
import pytest

from trica.graph import Network
from trica.ingest import LinqsDataset

DATA_DIR = Path(os.environ.get("TRICA_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))

# (directory, content file, links file) candidates per dataset
DATASETS = {
    "citeseer": [("citeseer", "citeseer.content", "citeseer.cites")],
    "cora": [("cora", "cora.content", "cora.cites")],
    "wisconsin": [("WebKB", "wisconsin.content", "wisconsin.cites"),
                  ("wisconsin", "wisconsin.content", "wisconsin.cites")],
    "attack": [("TerrorAttack", "terrorist_attack.nodes", "terrorist_attack_loc.edges"),
               ("attack", "terrorist_attack.nodes", "terrorist_attack_loc.edges")],
}


def find_dataset(name: str):
    for sub, content, links in DATASETS[name]:
        c, l = DATA_DIR / sub / content, DATA_DIR / sub / links
        if c.is_file() and l.is_file():
            return LinqsDataset(c, l)
    return None


def require_dataset(name: str) -> LinqsDataset:
    ds = find_dataset(name)
    if ds is None:
        pytest.skip(f"{name} files not found under {DATA_DIR} (set TRICA_DATA_DIR)")
    return ds


def make_network(n, edges, features=None, labels=None):
    features = np.zeros((n, 1)) if features is None else np.asarray(features, dtype=float)
    labels = tuple(labels) if labels is not None else (None,) * n
    return Network(tuple(f"v{i}" for i in range(n)), np.array(edges, dtype=np.int64).reshape(-1, 2),
                   features, labels)


@pytest.fixture
def triangle():
    return make_network(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return make_network(3, [(0, 1), (1, 2)])


def random_graph(rng, n, p):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return make_network(n, np.column_stack([iu[keep], ju[keep]]))


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", []) or [])
            if "criterion" in props and (rep.when == "call" or rep.skipped):
                rows.append((props["criterion"], rep.outcome, rep.nodeid.split("::")[-1]))
    if not rows:
        return
    by_id: dict = {}
    for cid, outcome, name in rows:
        by_id.setdefault(cid, {})[name] = outcome
    terminalreporter.section("acceptance criteria")
    for cid in sorted(by_id):
        outcomes = set(by_id[cid].values())
        verdict = "FAIL" if "failed" in outcomes else "PASS" if "passed" in outcomes else "SKIP"
        name = sorted(by_id[cid])[0].split("[")[0]
        terminalreporter.write_line(f"criterion {cid:>2}: {verdict}  {name}")
