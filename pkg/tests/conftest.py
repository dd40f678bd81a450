import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus_gen import write_java_corpus, write_posts_dump  # noqa: E402

from sodefect.ingest import load_training_corpus  # noqa: E402
from sodefect.pv import TrainingConfig, train  # noqa: E402


@pytest.fixture(scope="session")
def java_corpus_dir(tmp_path_factory):
    return write_java_corpus(tmp_path_factory.mktemp("corpus"), 60, seed=1)


@pytest.fixture(scope="session")
def java_corpus(java_corpus_dir):
    return load_training_corpus(java_corpus_dir, "Java")


@pytest.fixture(scope="session")
def small_model(java_corpus):
    return train(java_corpus, TrainingConfig(vector_size=24, epochs=15, seed=7, infer_epochs=30))


@pytest.fixture(scope="session")
def posts_dump(tmp_path_factory):
    return write_posts_dump(tmp_path_factory.mktemp("dump") / "Posts.xml", 40, seed=2)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one (criterion, passed, detail) line per acceptance check."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(lines):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
