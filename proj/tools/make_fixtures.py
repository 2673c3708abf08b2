#!/usr/bin/env python3
"""Writes the bundled fixture corpus, conversation session and qrels.

The corpus has 50 passages: two topical clusters (throat cancer, Netflix)
plus distractors. Each judged-4 passage shares almost no vocabulary with the
turn's baseline query, but its key terms also appear in passages the baseline
query does retrieve, so guided-document keywords can lead the retriever to it.

Output is deterministic; rerunning reproduces the committed files.
"""

import json
import random
import sys
from pathlib import Path

TOPICAL = [
    # throat cancer cluster
    ("c01", "Throat cancer is a cancer that forms in the pharynx or larynx. Throat cancer often starts in the flat cells lining the throat."),
    ("c02", "Throat cancer symptoms include a persistent cough, voice changes and trouble swallowing. Laryngeal tumors can cause hoarseness."),
    ("c03", "Throat cancer is treatable with radiotherapy, surgery or chemotherapy. Early laryngeal tumors respond well to radiotherapy alone."),
    ("c04", "Is throat cancer treatable? Most early cases are treatable, and radiotherapy preserves the voice in many patients."),
    ("c05", "The cure rate of throat cancer depends on the stage. Early laryngeal tumors reach five-year survival near ninety percent after radiotherapy."),
    ("c06", "Cure rate statistics for throat cancer are reported as five-year survival. Survival for advanced stage disease falls below fifty percent."),
    ("c07", "Glottic carcinoma confined to the vocal cords carries an excellent outlook. Five-year survival exceeds ninety percent with radiotherapy."),
    ("c08", "Squamous cell carcinoma of the pharynx and larynx is linked to tobacco and alcohol. Human papillomavirus drives many oropharyngeal tumors."),
    ("c09", "Radiotherapy delivered over six weeks spares the vocal cords and swallowing muscles. Modern intensity modulated plans reduce side effects."),
    ("c10", "Smoking and heavy drinking raise the risk of laryngeal and pharyngeal carcinoma. Quitting tobacco lowers the risk over time."),
    ("c11", "Hoarseness lasting more than three weeks warrants an examination of the vocal cords. A laryngoscope lets doctors inspect the larynx."),
    ("c12", "Cancer of the larynx is staged by tumor size and spread to lymph nodes. Stage one tumors are small and confined to one site."),
    # netflix cluster
    ("n01", "Netflix is a subscription streaming service offering films and television series. Netflix started as a DVD rental business by mail."),
    ("n02", "Netflix produces original series and films for its subscription streaming platform. Members watch on televisions, phones and laptops."),
    ("n03", "Netflix competitors include Amazon Instant Video and Hulu Plus. Subscription streaming rivals compete on price and catalog."),
    ("n04", "Who are the competitors of Netflix? Hulu, Amazon and HBO compete with Netflix for subscription streaming customers."),
    ("n05", "Other Netflix competitors are Apple iTunes, Google Play and Vudu. In the Nordic countries Viaplay and HBO Nordic compete with Netflix."),
    ("n06", "In Australia Presto, Stan and Quickflix compete for streaming viewers. FandangoNow, UltraFlix and Voddler also rent films online."),
    ("n07", "Viaplay and HBO Nordic dominate Scandinavian subscription video. Presto and Stan target Australian households."),
    ("n08", "Brick and mortar video rental stores such as Blockbuster lost customers to DVD by mail. Blockbuster closed most stores by 2014."),
    ("n09", "Amazon Instant Video and Hulu Plus offer on demand catalogs. Apple iTunes sells and rents films by download."),
    ("n10", "Reed Hastings cofounded Netflix in 1997. The company moved from DVD by mail to streaming in 2007."),
    ("n11", "Streaming platforms license films from studios and pay for original productions. Catalog size drives subscriber growth."),
    ("n12", "FandangoNow, UltraFlix and Voddler rent and sell films online. Quickflix and Presto served Australian viewers."),
]

DISTRACTOR_TOPICS = {
    "cooking": ["Bread dough rises when yeast ferments sugar", "A cast iron pan holds heat evenly",
                "Risotto needs constant stirring and warm stock", "Fresh basil loses flavor when boiled",
                "Slow roasting softens tough cuts of beef", "Salted butter keeps longer than unsalted butter"],
    "astronomy": ["Jupiter has dozens of known moons", "A light year measures distance rather than time",
                  "Neutron stars pack a solar mass into a tiny sphere", "The Andromeda galaxy approaches the Milky Way",
                  "Saturn rings are made of ice and rock", "Comets grow tails as they near the sun"],
    "football": ["A penalty kick is taken from twelve yards", "The offside rule keeps attackers behind defenders",
                 "World Cup finals draw huge global audiences", "Goalkeepers may handle the ball inside the box",
                 "Extra time lasts thirty minutes in knockout games", "A hat trick means three goals by one player"],
    "gardening": ["Tomatoes need full sun and steady watering", "Compost improves soil structure and drainage",
                  "Pruning roses in late winter encourages blooms", "Mulch keeps weeds down and retains moisture",
                  "Clay soil drains slowly after heavy rain", "Bees pollinate squash and cucumber flowers"],
    "railways": ["Steam locomotives burned coal to boil water", "High speed trains run on dedicated tracks",
                 "Signal boxes once controlled every junction", "Narrow gauge lines climb steep mountain valleys",
                 "Freight trains haul containers between ports", "Electric trains draw power from overhead wires"],
}

SESSIONS = [
    ("31", [
        ("What is throat cancer?", "What is throat cancer?"),
        ("Is it treatable?", "Is throat cancer treatable?"),
        ("What is the cure rate?", "What is the cure rate of throat cancer?"),
    ]),
    ("49", [
        ("What is Netflix?", "What is Netflix?"),
        ("Who are its competitors?", "Who are Netflix's competitors?"),
        ("What are its other competitors?", "What are Netflix's other competitors?"),
    ]),
]

# Judgments mark only the planted passages: they echo the vocabulary of the
# passages the baseline query retrieves, not the baseline query itself.
QRELS = {
    "31_1": {"c08": 4, "c11": 2},
    "31_2": {"c07": 4, "c09": 3},
    "31_3": {"c07": 4, "c11": 2, "c09": 2},
    "49_1": {"n10": 4, "n02": 2},
    "49_2": {"n09": 4, "n06": 3, "n07": 2},
    "49_3": {"n06": 4, "n07": 4, "n12": 2, "n09": 2},
}


def distractors(rng, count):
    docs = []
    topics = sorted(DISTRACTOR_TOPICS)
    for i in range(count):
        topic = topics[i % len(topics)]
        first, second = rng.sample(DISTRACTOR_TOPICS[topic], 2)
        docs.append((f"x{i + 1:02d}", f"{first}. {second}."))
    return docs


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(7)
    corpus = TOPICAL + distractors(rng, 50 - len(TOPICAL))
    assert len(corpus) == 50
    with open(out / "corpus.jsonl", "w", newline="\n") as f:
        for doc_id, text in corpus:
            f.write(json.dumps({"doc_id": doc_id, "text": text}) + "\n")

    with open(out / "queries.jsonl", "w", newline="\n") as f:
        for conv, turns in SESSIONS:
            history = []
            for turn_id, (raw, baseline) in enumerate(turns, start=1):
                f.write(json.dumps({"conversation_id": conv, "turn_id": turn_id,
                                    "raw_query": raw, "baseline_query": baseline,
                                    "history": list(history)}) + "\n")
                history.append(raw)

    with open(out / "qrels.txt", "w", newline="\n") as f:
        for qid in sorted(QRELS):
            for doc_id, rel in sorted(QRELS[qid].items()):
                f.write(f"{qid} 0 {doc_id} {rel}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
