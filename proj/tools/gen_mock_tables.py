#!/usr/bin/env python3
"""Writes the mock provider tables under fixtures/mock/.

Stage tables key on (title, line range); chat tables key on the values the
chat engine sends. Output is deterministic (sorted keys, fixed indent).
"""

import json
import pathlib
import re

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "mock"

# (kind, summary, fingerspell, base, shorter, base_alt, longer, hashtags, guide)
BUTTER = [
    ("none", "", False, "SMOOTH LIKE BUTTER", "SMOOTH BUTTER", "BUTTER SMOOTH SAME",
     "[EYES-half-closed] SMOOTH LIKE BUTTER", ["#smooth", "#confident"],
     "Glide both hands outward slowly. Lift your brows and grin as the hands settle."),
    ("poetic", "Simile comparing charm to a criminal who slips in unnoticed.", False,
     "SNEAK LIKE CRIMINAL HIDE", "CRIMINAL HIDE", "SAME-AS THIEF SNEAK",
     "[SHOULDERS-hunched] SNEAK LIKE CRIMINAL HIDE", ["#playful", "#sly"],
     "Hunch the shoulders a little and glance sideways while signing SNEAK."),
    ("none", "", False, "POP LIKE TROUBLE", "POP TROUBLE", "TROUBLE EXPLODE",
     "[CHEEKS-puffed] POP LIKE TROUBLE", ["#bold"],
     "Puff the cheeks and release them on POP. Keep the hands sharp."),
    ("none", "", False, "BREAK-INTO YOUR HEART", "INTO HEART", "STEAL YOUR HEART",
     "SNEAK BREAK-INTO YOUR HEART [SMILE]", ["#flirty", "#playful"],
     "Point toward the audience on YOUR and finish with a small smile."),
    ("mismatch", "Slang for someone striking in sunglasses; a literal sign for shade misleads.", False,
     "COOL SUNGLASSES STUNNER", "COOL SUNGLASSES", "SUNGLASSES LOOK AMAZING",
     "[CHIN-up] COOL SUNGLASSES LOOK AMAZING", ["#cool", "#swagger"],
     "Raise the chin and slide imaginary sunglasses on. Hold a relaxed, confident face."),
    ("none", "", False, "ME OWE ALL MY MOTHER", "OWE MOTHER", "THANK MY MOTHER ALL",
     "YES ME OWE ALL MY MOTHER [HEAD-nod]", ["#grateful", "#warm"],
     "Soften the face on MOTHER and nod gently at the end."),
    ("poetic", "Simile: heat of summer stands for irresistible energy.", False,
     "HOT SAME-AS SUMMER", "HOT SUMMER", "SUMMER HEAT",
     "[FACE-fanning] HOT SAME-AS SUMMER SUN", ["#energetic", "#hot"],
     "Fan the face with one hand after HOT. Let the shoulders bounce with the beat."),
    ("none", "", False, "ME MAKE YOU SWEAT", "YOU SWEAT", "YOU SWEAT BECAUSE ME",
     "YES ME MAKE YOU SWEAT [SMIRK]", ["#teasing"],
     "Wipe the brow on SWEAT and end with a smirk."),
    ("none", "", False, "BREAK DOWN", "DOWN", "DANCE BREAK",
     "[BODY-bounce] BREAK DOWN NOW", ["#hype", "#dance"],
     "Drop both fists on DOWN in time with the beat and let the body bounce."),
    ("none", "", False, "OOH ME LOOK MIRROR", "LOOK MIRROR", "MIRROR ME SEE",
     "OOH WHEN ME LOOK MIRROR [SMILE]", ["#selfassured"],
     "Hold one palm like a mirror and admire it with a slow smile."),
    ("none", "", False, "MELT YOUR HEART TWO", "MELT HEART", "HEART MELT SPLIT",
     "ME MELT YOUR HEART SPLIT TWO", ["#romantic", "#playful"],
     "Let the hands drip downward on MELT. Keep the eyes soft."),
    ("none", "", False, "ME HAVE SUPERSTAR GLOW", "SUPERSTAR GLOW", "ME SHINE SUPERSTAR",
     "[EYES-wide] ME HAVE SUPERSTAR GLOW SHINE", ["#radiant", "#confident"],
     "Open the fingers outward from the body on GLOW with wide, bright eyes."),
    ("none", "", False, "DANCE BOOGIE", "BOOGIE", "DANCE BOOGIE",
     "[HIPS-sway] DO DANCE BOOGIE", ["#groovy"],
     "Sway the hips and keep the signs loose and rhythmic."),
    ("none", "", False, "SIDE-STEP RIGHT LEFT MY BEAT", "STEP MY BEAT", "STEP RIGHT LEFT BEAT",
     "[BODY-sway] SIDE-STEP RIGHT LEFT FOLLOW MY BEAT", ["#dance", "#fun"],
     "Step with the signs: right hand on RIGHT, left hand on LEFT, then tap the beat."),
    ("none", "", False, "HIGH LIKE MOON ROCK WITH ME BABY", "HIGH MOON ROCK", "MOON HIGH ROCK BABY",
     "[EYES-up] HIGH LIKE MOON ROCK WITH ME BABY", ["#dreamy", "#playful"],
     "Look up on MOON, then rock the shoulders and beckon on WITH ME."),
    ("none", "", False, "KNOW ME HAVE HEAT", "ME HEAT", "ME HOT KNOW",
     "YOU KNOW ME HAVE HEAT [SMIRK]", ["#confident"],
     "Tap the temple on KNOW and finish with a knowing smirk."),
    ("none", "", False, "ME SHOW YOU TALK CHEAP", "SHOW YOU", "TALK CHEAP ME SHOW",
     "LET ME SHOW YOU BECAUSE TALK CHEAP", ["#bold", "#cheeky"],
     "Wave off TALK with a shrug, then sign SHOW with a strong push."),
    ("none", "", False, "SIDE-STEP RIGHT LEFT MY BEAT", "STEP MY BEAT", "STEP RIGHT LEFT BEAT",
     "[BODY-sway] SIDE-STEP RIGHT LEFT FOLLOW MY BEAT", ["#dance", "#fun"],
     "Repeat the earlier steps and make them bigger this time."),
    ("none", "", False, "GET-IT ROLL", "ROLL", "LET ROLL",
     "[BODY-roll] GET-IT LET ROLL", ["#hype"],
     "Roll both hands forward and finish with a body roll."),
]

DYNAMITE = [
    ("poetic", "Metaphor: being in the stars means shining with joy, not astronomy.", False,
     "ME STARS TONIGHT", "ME STAR", "TONIGHT ME SHINE",
     "BECAUSE ME [HEAD-nod] ME IN STARS TONIGHT", ["#joyful", "#bright"],
     "Flick the fingers upward on STARS and keep a wide smile."),
    ("poetic", "Figurative fire: bringing energy that lights up the night.", False,
     "WATCH ME BRING FIRE NIGHT LIGHT-UP", "WATCH FIRE", "ME FIRE NIGHT BRIGHT",
     "[EYES-wide] WATCH ME BRING FIRE NIGHT LIGHT-UP", ["#energetic", "#fiery"],
     "Let the fingers flicker upward on FIRE and open the hands wide on LIGHT-UP."),
    ("none", "", False, "SING SONG WALK HOME", "SING HOME", "WALK HOME SING",
     "ME SING SONG WHEN WALK HOME", ["#carefree"],
     "Walk the fingers along the palm and bob the head as if humming."),
    ("cultural", "LeBron refers to basketball star LeBron James; a signer may not know the name sign.", True,
     "JUMP TOP F-S 'L-E-B-R-O-N'", "JUMP TOP", "JUMP HIGH F-S 'L-E-B-R-O-N'",
     "JUMP UP TOP SAME-AS F-S 'L-E-B-R-O-N' [HEAD-nod]", ["#confident", "#sporty"],
     "Mime a jump shot before fingerspelling the name, chin raised."),
]

TOKEN_RE = re.compile(r"\[[^\]]*\]|F-S\s+'[^']*'|\S+")


def token_count(gloss):
    return len(TOKEN_RE.findall(gloss))


def check(rows):
    for i, r in enumerate(rows):
        base, s, m, l = (token_count(x) for x in r[3:7])
        assert (s < base or base == 1) and s <= base, (i, r)
        assert s <= m <= l and l >= base, (i, r)
        assert 1 <= len(r[7]) <= 5 and all(t.startswith("#") for t in r[7]), (i, r)


def stage_entries(title, rows, batches):
    entries = []
    for lo, hi in batches:
        match = {"title": title, "line range": f"{lo}-{hi}"}
        idx = range(lo, hi + 1)
        entries.append({"template": "line_inspector", "match": match, "responses": [{"notes": [
            {"line_index": i, "kind": rows[i][0], "summary": rows[i][1],
             "needs_fingerspelling_hint": rows[i][2]} for i in idx]}]})
        entries.append({"template": "base_gloss", "match": match, "responses": [{"glosses": [
            {"line_index": i, "gloss": rows[i][3]} for i in idx]}]})
        entries.append({"template": "performance_guide", "match": match, "responses": [{"guides": [
            {"line_index": i, "mood_hashtags": rows[i][7], "performance_guide": rows[i][8]} for i in idx]}]})
        entries.append({"template": "alternative_gloss", "match": match, "responses": [{"alternatives": [
            {"line_index": i, "shorter": rows[i][4], "base_alt": rows[i][5], "longer": rows[i][6]}
            for i in idx]}]})
    return {"entries": entries}


INTENTS = [
    ("what does 'stars' mean here?", "Meaning"),
    ("Is this line about confidence or about love?", "meaning"),
    ("What is the hidden message behind this lyric?", "Intent: Meaning"),
    ("How should I sign 'criminal'?", "Glossing"),
    ("Can you check my gloss?", "Glossing."),
    ("Which sign fits undercover better?", "The category is Glossing"),
    ("What facial expression should I use here?", "Emoting"),
    ("How do I show the mood with my body?", "emoting"),
    ("Should I look playful or serious on this line?", "Emoting\n"),
    ("can you make this shorter?", "Timing"),
    ("My signing is too slow for the beat", "timing"),
    ("Could I make this longer to fill the pause?", "Answer: Timing"),
]


def intent_table():
    return {"entries": [{"template": "intent_classifier", "match": {"message": m}, "responses": [r]}
                        for m, r in INTENTS]}


def chat_table():
    e = []

    def add(template, responses, **match):
        entry = {"template": template, "responses": responses}
        if match:
            entry["match"] = {k.replace("_", " "): v for k, v in match.items()}
        e.append(entry)

    add("meaning", [
        "Cool shade stunner is slang. Is it about sunglasses? Or about someone who looks amazing? "
        "What picture comes to mind? Which feeling should the audience get?",
        "Cool shade stunner plays with slang for someone striking in sunglasses. "
        "What picture comes to your mind first? Should the sign show the glasses or the attitude?",
    ], lyric_line="Cool shade stunner")
    add("meaning", [
        "Here the stars are about feeling on top of the world tonight, not about the sky. "
        "How would you show that glow? Do you want to keep the stars image or sign the feeling directly?",
    ], lyric_line="'Cause I, I, I'm in the stars tonight")
    add("meaning", [
        "This line carries a playful boast. What do you think the singer wants the listener to feel? "
        "Which word feels most important to you?",
        "Let us look at the feeling behind the words. Which word feels most important to you?",
    ])
    add("glossing_refine", [
        "RELAX GIRL BUTTER keeps the easy mood. BUTTER alone may read as food, so try adding SMOOTH before it "
        "or a relaxed [EYES-half-closed] marker. Do you want to keep GIRL as the addressee?",
    ], user_gloss="RELAX GIRL BUTTER")
    add("glossing_refine", [
        "Your gloss keeps the main idea. You could move the strongest sign to the end so it lands on the beat. "
        "Would you like to try a version with one non-manual marker?",
    ])
    add("glossing_base", [
        "A good starting point is the suggested base gloss. Each sign maps to one key idea in the line. "
        "Which part would you like to put in your own words?",
    ])
    add("emoting_refine", [
        "With your gloss, put the biggest facial expression on the final sign and keep the first signs light. "
        "Does that match how you feel the line?",
    ])
    add("emoting_base", [
        "The mood here is confident and playful. Lift your brows on the first sign and let a grin grow through the line. "
        "Want to try a bolder version?",
    ])
    add("timing_base", [
        "The line passes in about 2 seconds, so 3 signs fit best. The shorter version is safest.",
        "The line goes by quickly, so the shorter version gives each sign room to breathe. "
        "The longer one works if you merge two signs into one smooth movement.",
    ])
    add("timing_refine", [
        "Your gloss feels a little rushed for this pace. You have 4 signs and 1 beat to spare. "
        "Try dropping the repeated sign or merging two movements.",
    ])
    add("proactive_opener", [
        "Heads up on this line: LeBron is a basketball star, and his name may not be recognized by your audience. "
        "Would you fingerspell the name or show a jump shot instead?",
    ], lyric_line="Jump up to the top, LeBron")
    add("proactive_opener", [
        "This line was flagged during analysis because its wording does not translate word for word. "
        "How would you like to convey the idea behind it?",
    ])
    return {"entries": e}


def write(name, table):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(table, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def main():
    check(BUTTER)
    check(DYNAMITE)
    assert len(BUTTER) == 19 and len(DYNAMITE) == 4
    write("butter-bts.json", stage_entries("Butter", BUTTER, [(0, 8), (9, 18)]))
    write("dynamite-bts.json", stage_entries("Dynamite", DYNAMITE, [(0, 3)]))
    write("intents.json", intent_table())
    write("chat.json", chat_table())


if __name__ == "__main__":
    main()
