import pytest

from radcotrain.corpus import BT
from radcotrain.linear import TrainConfig
from radcotrain.synth import GenConfig, generate


def small_config(**overrides) -> GenConfig:
    opts = dict(
        vocab_per_class=(300, 100), shared_noise_vocab=50, fnd_length_mean=40, imp_length_mean=15,
        n_labeled=120, n_unlabeled=300, n_test=60, seed=3,
    )
    opts.update(overrides)
    return GenConfig.for_task(BT, **opts)


FAST_TRAIN = TrainConfig(max_epochs=8, patience=3)


@pytest.fixture(scope="session")
def small_corpus():
    return generate(small_config())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
