"""Regenerate the bundled sample corpora under src/sumctx/data/.

The Persona-Chat-style sample is composed from phrase banks with a fixed
seed, so reruns produce byte-identical files. Run from the repo root:

    python scripts/make_fixture.py
"""

import json
import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "sumctx" / "data"
SEED = 2021
N_DIALOGUES = 20

# topic -> (persona sentence, speaker 2 mentions, speaker 1 prompts)
TOPICS = {
    "hunting": ("i like to go hunting.",
                ["hunting is one of my favorite hobbies.",
                 "i go bow hunting with my uncle every fall.",
                 "last season i finally got a deer with my bow."],
                ["do you spend much time outdoors?", "what do you do in the fall?"]),
    "halloween": ("my favorite holiday is halloween.",
                  ["halloween is the best holiday, i start decorating in september.",
                   "this year i am dressing up as a vampire."],
                  ["any plans for the holidays?", "do you like dressing up?"]),
    "chess": ("i like to play chess.",
              ["i play chess online most evenings.",
               "my rating is not great but i love the endgames."],
              ["do you play any games?", "what do you do after work?"]),
    "tennis": ("i am a professional tennis player.",
               ["i play tennis for a living, it is tough on the knees.",
                "i have a tournament in spain next month."],
               ["do you play any sports?", "are you traveling soon?"]),
    "nurse": ("i work as a nurse in a children's hospital.",
              ["i work night shifts at the hospital.",
               "the kids at the hospital keep me going even on long nights."],
              ["what do you do for work?", "do you like your job?"]),
    "cats": ("i have two cats named salt and pepper.",
             ["my two cats are asleep on my laptop right now.",
              "salt is shy but pepper will steal your food."],
             ["do you have any pets?", "are you a dog or a cat person?"]),
    "vegan": ("i have been vegan for five years.",
              ["i cook a lot since i went vegan.",
               "my best recipe is a lentil curry with coconut milk."],
              ["what did you have for dinner?", "do you like to cook?"]),
    "guitar": ("i play guitar in a small band.",
               ["my band plays covers at a bar on fridays.",
                "i have been practicing a new song on my guitar all week."],
               ["do you like music?", "what are you doing this weekend?"]),
    "farm": ("i grew up on a farm in iowa.",
             ["i grew up feeding chickens before school.",
              "my parents still grow corn and soybeans back in iowa."],
             ["where are you from?", "did you grow up in the city?"]),
    "marathon": ("i am training for my first marathon.",
                 ["i ran eighteen miles this morning for marathon training.",
                  "my knees hurt but the race is only six weeks away."],
                 ["how do you stay in shape?", "what did you do this morning?"]),
    "books": ("i read a book every week.",
              ["i just finished a mystery novel about a lighthouse keeper.",
               "the library near me has a great used book sale."],
              ["read anything good lately?", "what do you do to relax?"]),
    "remodel": ("i remodel old homes.",
                ["i also remodel homes when i am not busy.",
                 "right now i am redoing a kitchen in a house from 1920."],
                ["what kind of work do you do?", "are you handy?"]),
    "italy": ("my family is from italy.",
              ["my grandmother still makes pasta from scratch every sunday.",
               "i visited my cousins near naples last summer."],
              ["do you travel much?", "what is your family like?"]),
    "coffee": ("i drink way too much coffee.",
               ["i am on my fourth coffee of the day already.",
                "i roast my own beans at home now."],
               ["how is your day going?", "are you a morning person?"]),
    "painting": ("i paint landscapes in my spare time.",
                 ["i painted the lake near my house last weekend.",
                  "watercolor is hard but i keep trying."],
                 ["do you have any creative hobbies?", "what did you do last weekend?"]),
}

GREETINGS = ["hi , how are you doing today ?", "hello there , how is it going ?",
             "hey ! what are you up to ?", "good evening , how was your day ?"]
OPENERS = ["i am doing well , thanks for asking .", "pretty good , just relaxing .",
           "not bad , a bit tired but fine .", "great , it has been a busy day ."]
REACTIONS = ["that sounds fun .", "wow , that is really cool .", "oh nice , i did not expect that .",
             "that must be hard sometimes .", "i have always wanted to try that ."]
FOLLOWUPS = ["how long have you been doing that ?", "what got you into it ?",
             "is it expensive ?", "do your friends do it too ?"]
S1_FACTS = ["i work in an office downtown so i sit a lot .",
            "i just moved here for a new job .", "i have three younger sisters .",
            "i like watching old movies on the weekend .",
            "i am saving up for a trip to japan .", "my dog is named biscuit ."]
CLOSERS = ["that is good to hear .", "i hope it goes well for you .",
           "well it was nice chatting with you .", "maybe we can talk again soon ."]


def make_dialogue(rng: random.Random) -> tuple[list[str], list[tuple[str, str]]]:
    keys = rng.sample(sorted(TOPICS), 5)
    persona = [TOPICS[k][0] for k in keys]
    mentions = [(k, m) for k in keys for m in TOPICS[k][1]]
    rng.shuffle(mentions)
    n_pairs = rng.choice([7, 7, 8])
    pairs = [(rng.choice(GREETINGS), rng.choice(OPENERS) + " " + mentions[0][1])]
    used = 1
    for p in range(1, n_pairs):
        kind = rng.random()
        if kind < 0.35:
            s1 = rng.choice(REACTIONS) + " " + rng.choice(FOLLOWUPS)
        elif kind < 0.7:
            s1 = rng.choice(S1_FACTS) + " " + rng.choice(TOPICS[rng.choice(keys)][2])
        else:
            s1 = rng.choice(TOPICS[rng.choice(keys)][2])
        if p == n_pairs - 1:
            s2 = rng.choice(CLOSERS)
        else:
            s2 = mentions[used % len(mentions)][1]
            used += 1
            if rng.random() < 0.4:
                s2 += " " + rng.choice(FOLLOWUPS)
        pairs.append((s1, s2))
    return persona, pairs


def native_text(rng: random.Random) -> str:
    lines = []
    for _ in range(N_DIALOGUES):
        persona, pairs = make_dialogue(rng)
        k = 1
        for sentence in persona:
            lines.append(f"{k} your persona: {sentence}")
            k += 1
        for s1, s2 in pairs:
            lines.append(f"{k} {s1}\t{s2}")
            k += 1
    return "\n".join(lines) + "\n"


SAMSUM = [
    {"id": "s1",
     "dialogue": "Olivia: Did you remember to book the table for tonight?\r\n"
                 "Tom: Yes, 8 pm at the Thai place.\r\n"
                 "Olivia: Great, I'll meet you there.",
     "summary": "Tom booked a table at the Thai place for 8 pm tonight. Olivia will meet him there."},
    {"id": "s2",
     "dialogue": "Ben: Can you pick up milk on the way home?\r\nAnna: Sure, anything else?\r\n"
                 "Ben: Bread too, please.",
     "summary": "Anna will buy milk and bread on her way home."},
    {"id": "s3",
     "dialogue": "Mia: Is the meeting still at 10?\r\nLeo: It moved to 11.\r\nMia: Thanks!",
     "summary": "The meeting moved from 10 to 11."},
    {"id": "s4",
     "dialogue": "Sam: I lost my keys again.\r\nKate: Check the jacket you wore yesterday.\r\n"
                 "Sam: Found them, thank you!\r\nKate: Classic.",
     "summary": "Sam found his lost keys in yesterday's jacket thanks to Kate."},
]


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "personachat_sample.txt").write_text(native_text(random.Random(SEED)),
                                                 encoding="utf-8")
    (DATA / "samsum_sample.json").write_text(json.dumps(SAMSUM, indent=2) + "\n",
                                             encoding="utf-8")


if __name__ == "__main__":
    main()
