import pytest

from zoneocr.synth import SynthConfig, gen_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Four classes of six glyphs each; cheap enough for every CLI test."""
    root = tmp_path_factory.mktemp("corpus")
    gen_corpus(SynthConfig(n_classes=4, samples_per_class=6, master_seed=3), root)
    return root


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
