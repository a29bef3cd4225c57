#!/usr/bin/env python3
"""Writes the synthetic song fixtures under fixtures/.

Output is a pure function of the constants below (fixed seeds), so re-running
the script reproduces the committed files byte for byte.
"""

import json
import random
import re
import sys
from pathlib import Path

PAD_MS = 250
CUE_JITTER_MS = 200
ASR_JITTER_MS = 30
TOKEN_NOISE = 0.10

BUTTER = {
    "song_id": "butter-bts",
    "title": "Butter",
    "artist": "BTS",
    "description": "Dance-pop single released in 2021. Runtime 2:44. A bright, playful track about "
                   "confidence and charm, built on a bouncy bass line and hand-clap rhythm.",
    "video_url": "https://www.youtube.com/watch?v=WMweEpGlu_U",
    "seed": 20210521,
    "sections": [
        ("Verse 1", [
            "Smooth like butter",
            "Like a criminal undercover",
            "Gon' pop like trouble",
            "Breakin' into your heart like that",
            "Cool shade stunner",
            "Yeah, I owe it all to my mother",
            "Hot like summer",
            "Yeah, I'm makin' you sweat like that",
            "Break it down",
        ]),
        ("Pre-Chorus", [
            "Ooh, when I look in the mirror",
            "I'll melt your heart into two",
            "I got that superstar glow so",
            "Do the boogie like",
        ]),
        ("Chorus", [
            "Side step, right, left to my beat",
            "High like the moon, rock with me, baby",
            "Know that I got that heat",
            "Let me show you 'cause talk is cheap",
            "Side step, right, left to my beat",
            "Get it, let it roll",
        ]),
    ],
    # (line, word) pairs left out of the transcript.
    "asr_drops": [(5, 4), (11, 5), (16, 5)],
    # Lines whose subtitle text is split over two cues.
    "split_lines": [3, 5, 14],
}

DYNAMITE = {
    "song_id": "dynamite-bts",
    "title": "Dynamite",
    "artist": "BTS",
    "description": "Disco-pop single released in 2020. Runtime 3:19. An upbeat, nostalgic track "
                   "celebrating everyday joy, with funk guitar and brass.",
    "video_url": "https://www.youtube.com/watch?v=gdZLi9oWNZg",
    "seed": 20200821,
    "sections": [
        ("Verse 1", [
            "'Cause I, I, I'm in the stars tonight",
            "So watch me bring the fire and set the night alight",
            "Sing song when I'm walking home",
            "Jump up to the top, LeBron",
        ]),
    ],
    "asr_drops": [],
    "split_lines": [],
}

# Transcript spellings that differ from the lyric sheet.
ASR_SPELLING = {"gon'": "gonna", "breakin'": "breaking", "makin'": "making", "'cause": "because"}
# Caption-style corruptions used for subtitle token noise.
CUE_NOISE = {"butter": "budder", "stunner": "stunna", "mother": "mutha", "heart": "hart",
             "mirror": "mira", "glow": "glo", "boogie": "boogy", "heat": "heats", "cheap": "cheep",
             "summer": "sumer", "trouble": "trubble", "criminal": "criminel", "beat": "beats"}
FILLERS = ["uh", "mm", "hey"]


def normalize(text):
    # Mirrors normalize_text for the ASCII lyric sheet used here.
    text = text.lower().replace("’", "'")
    out = []
    for i, c in enumerate(text):
        word = lambda j: 0 <= j < len(text) and (text[j].isalnum())
        if c.isalnum():
            out.append(c)
        elif c == "'" and (word(i - 1) or word(i + 1)):
            out.append(c)
        elif c == "-" and word(i - 1) and word(i + 1):
            out.append(c)
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def vtt_time(ms):
    return "%02d:%02d:%02d.%03d" % (ms // 3600000, ms // 60000 % 60, ms // 1000 % 60, ms % 1000)


def noisy_cue_text(rng, words):
    out = []
    budget = 1 if len(words) <= 4 else 2
    for w in words:
        if budget > 0 and rng.random() < TOKEN_NOISE:
            budget -= 1
            choice = rng.randrange(3)
            if choice == 0 and w in CUE_NOISE:
                out.append(CUE_NOISE[w])
            elif choice == 1 and len(words) > 3:
                continue
            else:
                out.extend([w, rng.choice(FILLERS)])
            continue
        out.append(w)
    return " ".join(out)


def build(song, root):
    rng = random.Random(song["seed"])
    lines = [(label, text) for label, texts in song["sections"] for text in texts]

    t = 4000
    truth = []
    for index, (label, text) in enumerate(lines):
        words = []
        for surface in normalize(text).split():
            dur = rng.randint(220, 420)
            words.append({"surface": surface, "start_ms": t, "duration_ms": dur})
            t += dur + rng.randint(40, 140)
        truth.append({"index": index, "section": label, "text": text, "words": words})
        t += rng.randint(500, 900)
    duration_ms = t + 3000

    cues = [(1000, 3200, "[Music]")]
    for line in truth:
        words = line["words"]
        start = words[0]["start_ms"] - PAD_MS + rng.randint(-CUE_JITTER_MS, CUE_JITTER_MS)
        last = words[-1]
        end = last["start_ms"] + last["duration_ms"] + PAD_MS + rng.randint(-CUE_JITTER_MS, CUE_JITTER_MS)
        tokens = [w["surface"] for w in words]
        if line["index"] in song["split_lines"]:
            k = len(tokens) // 2
            a, b = words[k - 1], words[k]
            mid = (a["start_ms"] + a["duration_ms"] + b["start_ms"]) // 2
            cues.append((start, mid, noisy_cue_text(rng, tokens[:k])))
            cues.append((mid, end, noisy_cue_text(rng, tokens[k:])))
        else:
            cues.append((start, end, noisy_cue_text(rng, tokens)))
        line["span"] = [words[0]["start_ms"], last["start_ms"] + last["duration_ms"]]

    asr = []
    drops = set(tuple(d) for d in song["asr_drops"])
    for line in truth:
        for wi, w in enumerate(line["words"]):
            if (line["index"], wi) in drops:
                continue
            surface = ASR_SPELLING.get(w["surface"], w["surface"])
            asr.append({"surface": surface,
                        "start_ms": w["start_ms"] + rng.randint(-ASR_JITTER_MS, ASR_JITTER_MS),
                        "duration_ms": w["duration_ms"] + rng.randint(-20, 20)})
        # A filler in the gap after some lines, well clear of the next line.
        if line["index"] % 4 == 1:
            end = line["span"][1]
            asr.append({"surface": rng.choice(FILLERS), "start_ms": end + 120, "duration_ms": 150})
    asr.sort(key=lambda w: w["start_ms"])

    out = root / song["song_id"]
    out.mkdir(parents=True, exist_ok=True)
    meta = {k: song[k] for k in ("title", "artist", "description", "video_url")}
    meta["duration_ms"] = duration_ms
    write(out / "meta.json", json.dumps(meta, indent=2) + "\n")
    lyrics = []
    for label, texts in song["sections"]:
        lyrics.append("[%s]" % label)
        lyrics.extend(texts)
        lyrics.append("")
    write(out / "lyrics.txt", "\n".join(lyrics))
    vtt = ["WEBVTT", ""]
    for s, e, text in cues:
        vtt += ["%s --> %s" % (vtt_time(s), vtt_time(e)), text, ""]
    write(out / "subs.vtt", "\n".join(vtt))
    write(out / "words.json", json.dumps(asr, indent=1) + "\n")
    write(out / "ground_truth.json", json.dumps({"lines": truth}, indent=1) + "\n")
    return sum(len(l["words"]) for l in truth), len(truth)


def write(path, data):
    path.write_text(data, encoding="utf-8")


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures"
    for song in (BUTTER, DYNAMITE):
        words, lines = build(song, root)
        print("%s: %d lines, %d words" % (song["song_id"], lines, words))


if __name__ == "__main__":
    main()
