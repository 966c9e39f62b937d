"""Three synthetic tasks, a lookup table for the mock model, and the metrics
and NPM a correct harness must report for them.

The mock answers by prompt suffix (the rendered query of each test example),
so the expected predictions depend only on the table, never on which shots
end up in the prompt.

    python3 tests/oracles/eval_fixture.py
"""
import json
import pathlib
import random
import unicodedata

OUT = pathlib.Path(__file__).resolve().parents[1] / "data" / "eval"
QUERY = "{input}\nResposta:"
PREFIX = " "

TOPICS = ["o jogo de ontem", "o novo restaurante", "a aula de hoje", "o filme da semana",
          "o atendimento do banco", "a viagem de férias", "o show no estádio",
          "a reforma da praça", "o livro do mês", "a previsão do tempo", "o aplicativo novo",
          "a feira do bairro", "o hotel na praia", "a corrida de domingo", "o curso online"]
MOODS = {"positivo": ["adorei", "foi excelente", "recomendo muito", "superou tudo"],
         "negativo": ["detestei", "foi péssimo", "não recomendo", "uma decepção"],
         "neutro": ["foi normal", "nada de especial", "como esperado", "sem novidades"]}
QUESTIONS = [("Qual é a capital do Brasil?", ["Brasília"]),
             ("Quem escreveu Dom Casmurro?", ["Machado de Assis", "Machado"]),
             ("Em que ano foi a independência do Brasil?", ["1822"]),
             ("Qual é o maior rio do Brasil?", ["rio Amazonas", "Amazonas"]),
             ("Qual é a moeda do Brasil?", ["real", "o real"]),
             ("Onde fica o Cristo Redentor?", ["Rio de Janeiro", "no Rio de Janeiro"]),
             ("Qual é o estado mais populoso?", ["São Paulo"]),
             ("Qual é a língua oficial do Brasil?", ["português", "língua portuguesa"]),
             ("Quantos estados tem o Brasil?", ["26 estados e o Distrito Federal", "26"]),
             ("Qual é o bioma do Pantanal?", ["área úmida", "planície alagável"]),
             ("Quem foi o primeiro imperador?", ["Dom Pedro I", "Pedro I"]),
             ("Qual é a festa popular de fevereiro?", ["Carnaval", "o Carnaval"])]


def normalize(s):
    s = "".join(c for c in s.lower() if not unicodedata.category(c).startswith("P"))
    return " ".join(s.split())


def token_f1(pred, gold):
    p, g = normalize(pred).split(), normalize(gold).split()
    if not p or not g:
        return 1.0 if not p and not g else 0.0
    counts = {}
    for t in g:
        counts[t] = counts.get(t, 0) + 1
    common = 0
    for t in p:
        if counts.get(t, 0) > 0:
            counts[t] -= 1
            common += 1
    if common == 0:
        return 0.0
    precision = common / len(p)
    recall = common / len(g)
    return 2.0 * precision * recall / (precision + recall)


def f1_counts(tp, fp, fn):
    d = 2.0 * tp + fp + fn
    return 0.0 if d == 0 else 2.0 * tp / d


def logprobs(rng):
    return [round(-rng.uniform(0.05, 4.0), 3) for _ in range(rng.randint(1, 3))]


def total(lps):
    s = 0.0
    for v in lps:
        s += v
    return s


def write_task(name, meta, shots, tests):
    d = OUT / "tasks" / name
    d.mkdir(parents=True, exist_ok=True)
    (d / "task.json").write_text(json.dumps(meta, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    for fname, rows in (("shots.jsonl", shots), ("test.jsonl", tests)):
        (d / fname).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows),
                               encoding="utf-8")


def main():
    rng = random.Random(1822)
    scores, generations, results = [], [], []

    # 1. multiclass sentiment, plain likelihood ranking, macro F1.
    labels = ["positivo", "negativo", "neutro"]
    shots = []
    for i in range(9):
        lab = labels[i % 3]
        shots.append({"id": f"s{i}", "input": f"Opinião: {rng.choice(TOPICS)}, {rng.choice(MOODS[lab])}.",
                      "label": lab})
    tests, preds, golds = [], [], []
    for i in range(24):
        lab = rng.choice(labels)
        text = f"Opinião: {rng.choice(TOPICS)}, {rng.choice(MOODS[lab])} ({i})."
        tests.append({"id": f"t{i}", "input": text, "label": lab})
        table = {c: logprobs(rng) for c in labels}
        if i % 7 == 3:  # exact tie between the first two labels
            table[labels[1]] = list(table[labels[0]])
        best, best_score = None, None
        for c in labels:
            scores.append({"prompt": QUERY.format(input=text), "continuation": PREFIX + c,
                           "logprobs": table[c]})
            sc = total(table[c])
            if best_score is None or sc > best_score:
                best, best_score = c, sc
        preds.append(best)
        golds.append(lab)
    f1s = []
    for c in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        f1s.append(f1_counts(tp, fp, fn))
    raw1 = total(f1s) / len(f1s) * 100.0
    write_task("t1_sentimento", {
        "name": "sintetico-sentimento", "origin": "native", "kind": "multiclass", "num_classes": 3,
        "instruction": "Classifique o sentimento de cada opinião.", "metric": "f1_macro",
        "random_score": 32.4, "high_score": 100, "balanced_shots": True, "num_shots": 6,
        "answer_mode": "rank", "labels": labels}, shots, tests)
    results.append(("sintetico-sentimento", "native", raw1, 32.4, 100.0))

    # 2. multiple choice, likelihood normalized by candidate length, accuracy.
    shots, tests, hits = [], [], 0
    for i in range(4):
        q, answers = QUESTIONS[i]
        shots.append({"id": f"s{i}", "input": f"Pergunta: {q}", "label": answers[0]})
    for i in range(20):
        q, answers = QUESTIONS[4 + i % 8]
        text = f"Pergunta ({i + 1}): {q}"
        cands = [answers[0]] + rng.sample([a for a in ["Recife", "1500", "dólar", "Manaus",
                                                         "Pedro Álvares Cabral", "espanhol",
                                                         "Minas Gerais", "cerrado"]], 3)
        rng.shuffle(cands)
        tests.append({"id": f"q{i}", "input": text, "label": answers[0], "candidates": cands})
        best, best_score = None, None
        for c in cands:
            lps = logprobs(rng)
            scores.append({"prompt": QUERY.format(input=text), "continuation": PREFIX + c, "logprobs": lps})
            sc = total(lps) / len(c)
            if best_score is None or sc > best_score:
                best, best_score = c, sc
        hits += best == answers[0]
    raw2 = hits / len(tests) * 100.0
    write_task("t2_multipla", {
        "name": "sintetico-multipla", "origin": "translated", "kind": "multichoice", "num_classes": 4,
        "instruction": "Escolha a alternativa correta.", "metric": "accuracy", "random_score": 25,
        "high_score": 100, "balanced_shots": False, "num_shots": 2, "answer_mode": "rank_char_norm"},
        shots, tests)
    results.append(("sintetico-multipla", "translated", raw2, 25.0, 100.0))

    # 3. extractive QA by generation, token F1; one prompt is missing from the
    # table and must count as a failed example.
    shots, tests, f1_sum = [], [], 0.0
    for i in range(3):
        q, answers = QUESTIONS[i]
        shots.append({"id": f"s{i}", "input": f"Contexto: perguntas gerais.\nPergunta: {q}",
                      "answers": answers})
    noise = ["", "\nPergunta: outra coisa", "  ", ".", "\n\nResposta: x", " e mais detalhes"]
    for i in range(18):
        q, answers = QUESTIONS[(i * 5) % len(QUESTIONS)]
        text = f"Contexto: documento {i}.\nPergunta: {q}"
        tests.append({"id": f"g{i}", "input": text, "answers": answers})
        if i == 11:
            f1_sum += 0.0
            continue
        out = rng.choice([answers[0], answers[-1], "não sei", answers[0].upper(), "talvez " + answers[0]])
        gen = " " + out + rng.choice(noise)
        generations.append({"prompt": QUERY.format(input=text), "text": gen})
        pred = gen.split("\n")[0].strip(" \t\r\f\v")
        f1_sum += max(token_f1(pred, g) for g in answers)
    raw3 = f1_sum / len(tests) * 100.0
    write_task("t3_extrativo", {
        "name": "sintetico-extrativo", "origin": "native", "kind": "extractive_qa",
        "instruction": "Responda com um trecho curto.", "metric": "token_f1", "random_score": 0,
        "high_score": 100, "balanced_shots": False, "num_shots": 3, "answer_mode": "generate",
        "max_new_tokens": 16}, shots, tests)
    results.append(("sintetico-extrativo", "native", raw3, 0.0, 100.0))

    (OUT / "mock.json").write_text(json.dumps(
        {"mode": "lookup", "match": "suffix", "scores": scores, "generations": generations},
        ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    comps = {"native": [], "translated": []}
    for name, origin, raw, rnd, high in results:
        comps[origin].append(100.0 * (raw - rnd) / (high - rnd))
    every = []
    for name, origin, raw, rnd, high in results:
        every.append(100.0 * (raw - rnd) / (high - rnd))
    golden = {
        "tasks": {name: {"raw": raw, "origin": origin} for name, origin, raw, _, _ in results},
        "npm_native": total(comps["native"]) / len(comps["native"]),
        "npm_translated": total(comps["translated"]) / len(comps["translated"]),
        "npm_all": total(every) / len(every),
    }
    (OUT / "golden.json").write_text(json.dumps(golden, indent=1) + "\n")
    print(json.dumps(golden, indent=1))


if __name__ == "__main__":
    main()
