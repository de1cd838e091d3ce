"""Regenerate the bundled demo collection and generation fixture.

The corpus has 50 documents over 5 topics. Each topic has two relevant
documents sharing the query's surface vocabulary, three relevant
documents written entirely in synonym vocabulary (invisible to BM25),
and five distractors that share a query word without being relevant.
The fixture's canned paraphrases name the synonym vocabulary, so the
generation-augmented pipelines can retrieve the hidden relevants.

Run from the repo root after any change to analysis / retrieval /
prompting code:  python tools/build_demo_assets.py
"""

import math
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from qreform.analysis import AnalysisConfig
from qreform.errors import UsageError
from qreform.generation import (
    GenerationResult,
    PromptKind,
    build_prompt,
    write_generation_fixture,
)
from qreform.passages import ContextConfig, select_context
from qreform.retrieval import WeightedQuery, build_index, search

OUT = REPO / "src" / "qreform" / "data" / "demo"

TOPICS = {
    "q1": "solar panel efficiency",
    "q2": "heart disease prevention",
    "q3": "ancient roman architecture",
    "q4": "machine translation quality",
    "q5": "coral reef bleaching",
}

# per topic: (surface-relevant, hidden-relevant, distractor) document texts
COLLECTION = {
    "q1": (
        [
            "solar panel efficiency gains let a rooftop array turn more light into usable power each season",
            "testing solar panel efficiency under cloud cover shows the newest designs hold output remarkably well",
        ],
        [
            "photovoltaic module output improves when engineers cool the silicon and clean dust from the glass",
            "a photovoltaic array converts sunlight into electricity and better wiring raises the yield markedly",
            "thin film photovoltaic cells promise cheap electricity from sunlight on warehouse roofing sheets",
        ],
        [
            "the conference panel discussed television drama and celebrity culture for an hour",
            "our solar system has eight planets orbiting an ordinary middle aged star",
            "fuel efficiency ratings for pickup trucks disappointed reviewers again this year",
            "the advisory panel on museum funding met behind closed doors",
            "wood stove efficiency depends mostly on seasoned firewood and a clean flue",
        ],
    ),
    "q2": (
        [
            "heart disease prevention starts with daily exercise and a balanced diet low in processed fat",
            "doctors outline heart disease prevention guidelines that cut risk for older patients substantially",
        ],
        [
            "cardiovascular health improves with brisk walking lower cholesterol and regular blood pressure checks",
            "cardiac screening finds narrowed arteries early so patients can change habits before damage spreads",
            "keeping arteries clear through diet lowers cholesterol and protects the cardiovascular system",
        ],
        [
            "crop disease wiped out half the barley harvest in the valley",
            "crime prevention programs pair youth mentors with neighborhood volunteers",
            "the old quarter is the heart of the city with cafes and markets",
            "a fungal disease is spreading through the ash trees of the county",
            "fire prevention week teaches children how smoke alarms save lives",
        ],
    ),
    "q3": (
        [
            "ancient roman architecture relied on arches and concrete to span wide public spaces",
            "students of ancient roman architecture measure temple columns and study surviving city plans",
        ],
        [
            "the colosseum held fifty thousand spectators and its tiered seating inspired stadium builders for centuries",
            "aqueducts carried mountain water across valleys on stacked stone arches into imperial cities",
            "empire era builders raised domes amphitheaters and basilicas that still stand across the mediterranean",
        ],
        [
            "roman numerals confuse pupils who meet them first on clock faces",
            "modern architecture favors glass towers and open floor plates",
            "ancient pottery from greek islands fills the museum's new wing",
            "the roman alphabet spread with printing and trade across continents",
            "landscape architecture shapes parks with native planting and water features",
        ],
    ),
    "q4": (
        [
            "machine translation quality improved sharply once systems learned from millions of example sentences",
            "evaluating machine translation quality still needs human judges alongside automatic scoring",
        ],
        [
            "bilingual corpora align source and target sentences so software learns phrase correspondences",
            "multilingual language models map words from many tongues into one shared space",
            "sentence alignment across parallel texts lets systems learn idioms and rare word pairs",
        ],
        [
            "the machine shop bought a new lathe for precision brass fittings",
            "a fresh translation of the epic poem divides literary critics",
            "air quality warnings kept joggers indoors for most of august",
            "washing machine repairs cost more than many budget models",
            "print quality on the office laser has degraded since spring",
        ],
    ),
    "q5": (
        [
            "coral reef bleaching accelerates when summer heat lingers and corals expel their symbiotic algae",
            "divers mapping coral reef bleaching found white skeletal patches across the northern atolls",
        ],
        [
            "ocean warming stresses marine ecosystems and drives fish populations toward the poles",
            "marine biologists track seawater temperature spikes that leave lagoon habitats ghostly pale",
            "rising sea temperature harms the symbiotic algae that feed tropical marine invertebrates",
        ],
        [
            "household bleach ruins colored fabric so wash whites separately",
            "the reef knot holds firm under load yet unties easily",
            "snorkeling tours of the barrier reef sell out every july",
            "hair bleaching damages follicles without a conditioning routine",
            "the band played a reef break benefit concert at the marina",
        ],
    ),
}

# training-side topics for the pair-construction workflow: reformulation
# pairs of the same information need, judged against shared documents
TRAIN_TOPICS = {
    "t01": "solar panel efficiency gains",
    "t02": "rooftop photovoltaic output",
    "t03": "the efficiency of solar panels",
    "t04": "heart disease prevention advice",
    "t05": "cardiovascular health and arteries",
    "t06": "how is heart disease prevented",
    "t07": "coral reef bleaching causes",
    "t08": "ocean warming and marine life",
}

TRAIN_QRELS = {
    "t01": ["q1-rs0", "q1-rs1", "q1-rh0"],
    "t02": ["q1-rh0", "q1-rh1", "q1-rh2"],
    "t03": ["q1-rs0", "q1-rh1"],
    "t04": ["q2-rs0", "q2-rs1", "q2-rh0"],
    "t05": ["q2-rh0", "q2-rh1", "q2-rh2"],
    "t06": ["q2-rs0", "q2-rh2"],
    "t07": ["q5-rs0", "q5-rs1", "q5-rh0"],
    "t08": ["q5-rh0", "q5-rh1", "q5-rh2"],
}

# canned paraphrases naming the hidden vocabulary, most likely first
PARAPHRASES = {
    "q1": [
        ("photovoltaic module efficiency", 0.50),
        ("solar photovoltaic output", 0.35),
        ("sunlight conversion yield electricity", 0.20),
        ("photovoltaic array electricity", 0.10),
        ("module energy output", 0.05),
    ],
    "q2": [
        ("cardiovascular disease prevention", 0.50),
        ("cardiac health arteries", 0.35),
        ("lower cholesterol cardiovascular risk", 0.20),
        ("heart cardiac screening", 0.10),
        ("arteries cholesterol diet", 0.05),
    ],
    "q3": [
        ("roman colosseum aqueducts", 0.50),
        ("ancient empire builders architecture", 0.35),
        ("colosseum amphitheater domes", 0.20),
        ("aqueducts arches stone", 0.10),
        ("imperial roman buildings", 0.05),
    ],
    "q4": [
        ("bilingual machine translation", 0.50),
        ("multilingual language models translation", 0.35),
        ("sentence alignment parallel texts", 0.20),
        ("bilingual corpora language pairs", 0.10),
        ("translation language quality", 0.05),
    ],
    "q5": [
        ("coral bleaching ocean warming", 0.50),
        ("marine ecosystem sea temperature", 0.35),
        ("ocean warming marine habitats", 0.20),
        ("seawater temperature coral stress", 0.10),
        ("reef marine temperature", 0.05),
    ],
}


def doc_records():
    records = []
    for qid in sorted(COLLECTION):
        surface, hidden, noise = COLLECTION[qid]
        for i, text in enumerate(surface):
            records.append((f"{qid}-rs{i}", text))
        for i, text in enumerate(hidden):
            records.append((f"{qid}-rh{i}", text))
        for i, text in enumerate(noise):
            records.append((f"{qid}-n{i}", text))
    return records


def qrels_lines():
    lines = []
    for qid in sorted(COLLECTION):
        surface, hidden, noise = COLLECTION[qid]
        for i in range(len(surface)):
            lines.append(f"{qid} 0 {qid}-rs{i} 1")
        for i in range(len(hidden)):
            lines.append(f"{qid} 0 {qid}-rh{i} 1")
        for i in range(len(noise)):
            lines.append(f"{qid} 0 {qid}-n{i} 0")
    return lines


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    records = doc_records()
    assert len(records) == 50, len(records)
    for _, text in records:
        assert len(text.split()) <= 128

    (OUT / "corpus.tsv").write_text(
        "".join(f"{d}\t{t}\n" for d, t in records), encoding="utf-8"
    )
    (OUT / "topics.tsv").write_text(
        "".join(f"{q}\t{t}\n" for q, t in TOPICS.items()), encoding="utf-8"
    )
    (OUT / "qrels.txt").write_text(
        "\n".join(qrels_lines()) + "\n", encoding="utf-8"
    )
    (OUT / "train_topics.tsv").write_text(
        "".join(f"{q}\t{t}\n" for q, t in TRAIN_TOPICS.items()), encoding="utf-8"
    )
    (OUT / "train_qrels.txt").write_text(
        "".join(
            f"{qid} 0 {doc} 1\n" for qid, docs in TRAIN_QRELS.items() for doc in docs
        ),
        encoding="utf-8",
    )

    config = AnalysisConfig.default()
    index = build_index(records, config)
    fixture = {}
    for qid, text in TOPICS.items():
        results = [
            GenerationResult(p, math.log(w)) for p, w in PARAPHRASES[qid]
        ]
        ranking = search(index, WeightedQuery.from_text(text, config), k=1000)
        context = select_context(
            index, WeightedQuery.from_text(text, config), ranking, ContextConfig()
        )
        for kind in PromptKind:
            try:
                prompt = build_prompt(kind, text, context)
            except UsageError:
                continue
            fixture[prompt] = results
    write_generation_fixture(fixture, OUT / "generations.jsonl")
    print(f"wrote {len(records)} docs, {len(TOPICS)} topics, {len(fixture)} fixture prompts")


if __name__ == "__main__":
    main()
