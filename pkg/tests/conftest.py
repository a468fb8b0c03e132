import random
from pathlib import Path

import pytest
from hypothesis import strategies as st

from sumctx.corpus import Dialogue, load_corpus, parse_samsum_json

DATA = Path(__file__).resolve().parents[1] / "src" / "sumctx" / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"
SAMPLE_CORPUS = DATA / "personachat_sample.txt"
SAMPLE_SAMSUM = DATA / "samsum_sample.json"

# Seven-turn exchange with three hand-written summaries of growing prefixes.
HUNTING_TURNS = [
    "Hi, how are you doing? I'm getting ready to do some cheetah chasing to stay in shape.",
    "You must be very fast. Hunting is one of my favorite hobbies.",
    "I am! For my hobby I like to do canning or some whittling.",
    "I also remodel homes when i am not out bow hunting.",
    "That's neat. When I was in high school I placed 6th in 100m dash !",
    "I also remodel homes when i am not out bow hunting.",
    "That's neat. When I was in high school I placed 6th in 100m dash !",
]
HUNTING_PERSONA = [
    "i like to go hunting.",
    "i remodel homes.",
    "i like to shoot a bow.",
    "my favorite holiday is halloween.",
    "i live in the country.",
]


@pytest.fixture
def hunting_dialogue():
    return Dialogue.from_texts("hunting", HUNTING_PERSONA, HUNTING_TURNS)


@pytest.fixture(scope="session")
def sample_corpus():
    return load_corpus(SAMPLE_CORPUS)


@pytest.fixture(scope="session")
def samsum_pairs():
    return parse_samsum_json(SAMPLE_SAMSUM.read_text(encoding="utf-8"))


# -- generators of valid dialogues -----------------------------------------

utterance = st.text(min_size=1, max_size=30).filter(lambda s: s.strip())


@st.composite
def dialogues(draw, id_strategy=st.text(min_size=1, max_size=12)):
    did = draw(id_strategy)
    persona = draw(st.lists(utterance, min_size=1, max_size=6))
    texts = draw(st.lists(utterance, min_size=1, max_size=12))
    return Dialogue.from_texts(did, persona, texts)


@st.composite
def corpora(draw, max_size=6):
    ids = draw(st.lists(st.text(min_size=1, max_size=10), unique=True, max_size=max_size))
    out = []
    for did in ids:
        out.append(draw(dialogues(id_strategy=st.just(did))))
    return out


WORDS = ("i like to go hunting you must be very fast that is neat my cat "
         "sleeps all day what about your weekend plans").split()


def random_dialogue(rng: random.Random, did: str, max_turns: int = 16) -> Dialogue:
    def sentence():
        return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 12)))
    persona = [sentence() for _ in range(rng.randint(1, 6))]
    return Dialogue.from_texts(did, persona, [sentence() for _ in range(rng.randint(1, max_turns))])
