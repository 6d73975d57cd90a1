import json

import pytest

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, ok in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")

# The 20-record corpus: 14 clean, 3 with planted emails (kept, redacted),
# 2 with short responses (dropped TOO_SHORT), 1 with a lexicon hit
# (dropped OFFENSIVE). Hand-counted expectations: 17 kept, EMAIL x3.
CLEAN_RESPONSES = [
    "i have been feeling much better after practicing the breathing exercises every day",
    "talking it through with someone really helped me see the situation more clearly",
    "my sleep schedule finally settled down once i stopped doomscrolling before bed",
    "the journaling habit you suggested gave me a place to put the worry spirals",
    "I'M doing okay today \U0001F60A just tired from work but the walk outside helped",
    "we tried the grounding technique during the panic wave and it actually worked",
    "sharing this with my sister took courage but she responded with so much warmth",
    "some days are heavier than others yet the small routines keep me anchored",
    "learning to name the feeling instead of fighting it made a real difference",
    "after the move i felt unmoored but the new support group meets twice weekly",
    "setting one tiny goal each morning keeps the overwhelm from taking over",
    "the therapist's worksheet on cognitive distortions opened my eyes to old patterns",
    "slow mornings with tea and stretching have become my favourite act of self care",
    "naming three good things before sleep sounds silly but it quietly rewired my evenings",
]

EMAIL_RESPONSES = [
    "you can reach my old counselor at help.desk@example.org if the referral ever falls through",
    "my support worker sarah.lee@clinic-mail.net said journaling between sessions keeps momentum going",
    "the intake team replied from admissions@wellness.example.com and scheduled me within two weeks",
]

SHORT_RESPONSES = ["thanks", "ok sure thing"]

OFFENSIVE_RESPONSE = (
    "honestly my coworker is a badword and the whole office knows it but nobody says anything"
)


def fixture_records():
    records = []
    sources = ["kaggle", "hf", "reddit", "twitter", "apa"]
    for i, response in enumerate(CLEAN_RESPONSES):
        records.append(
            {
                "id": f"clean-{i:02d}",
                "source": sources[i % len(sources)],
                "prompt": f"how are you coping this week entry {i}",
                "response": response,
            }
        )
    for i, response in enumerate(EMAIL_RESPONSES):
        records.append(
            {
                "id": f"email-{i}",
                "source": "reddit",
                "prompt": "did you manage to find professional help",
                "response": response,
            }
        )
    for i, response in enumerate(SHORT_RESPONSES):
        records.append(
            {
                "id": f"short-{i}",
                "source": "twitter",
                "prompt": "any update on how the week went",
                "response": response,
            }
        )
    records.append(
        {
            "id": "offensive-0",
            "source": "reddit",
            "prompt": "how is the workplace situation going",
            "response": OFFENSIVE_RESPONSE,
        }
    )
    return records


@pytest.fixture
def corpus20(tmp_path):
    path = tmp_path / "raw20.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for record in fixture_records():
            handle.write(json.dumps(record) + "\n")
    return path


@pytest.fixture
def lexicon_file(tmp_path):
    path = tmp_path / "offensive.txt"
    path.write_text("badword\nslurword\n", encoding="utf-8")
    return path


@pytest.fixture
def pipeline_cfg(lexicon_file):
    from chatforge.pipeline import PipelineConfig

    return PipelineConfig(offensive_lexicon=lexicon_file)
