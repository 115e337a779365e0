import pytest

from relforge.config import LlmSettings, PipelineConfig, Thresholds
from relforge.corpus import Corpus, write_corpus_jsonl
from relforge.encoders import EncoderSpec, MockEncoder
from relforge.synthetic import make_synthetic_corpus

MOCK_SPECS = [
    EncoderSpec(name="mock-a", dimension=256, max_input_chars=2000),
    EncoderSpec(name="mock-b", dimension=384, max_input_chars=2000),
    EncoderSpec(name="mock-c", dimension=128, max_input_chars=2000),
]


@pytest.fixture
def mock_encoders():
    return [MockEncoder(spec) for spec in MOCK_SPECS]


@pytest.fixture
def synth_docs():
    return make_synthetic_corpus(n_docs=100, seed=7)


@pytest.fixture
def synth_corpus(synth_docs):
    return Corpus(documents=synth_docs)


@pytest.fixture
def corpus_file(tmp_path, synth_docs):
    path = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(synth_docs, path)
    return path


def make_config(corpus_path, output_dir, budget=5, seed=7):
    return PipelineConfig(
        corpus_path=corpus_path,
        output_dir=output_dir,
        encoders=list(MOCK_SPECS),
        llm=LlmSettings(kind="mock"),
        thresholds=Thresholds(),
        query_budget_per_source=budget,
        rng_seed=seed,
    )


@pytest.fixture
def config_factory(corpus_file):
    def factory(output_dir, budget=5, seed=7):
        return make_config(corpus_file, output_dir, budget=budget, seed=seed)

    return factory
