"""Generate the 200-document corpus fixture and its golden filter ledger.

Every document is built from a known clean text; the raw record is that text
passed through a known corruption (mojibake, HTML, NFD, control characters,
CRLF line ends, invalid UTF-8 bytes). The ledger is computed by a naive
re-statement of the quality rules over the clean text, and the packed token
stream by tiktoken, so nothing here shares code with the C++ pipeline.

    python3 tests/oracles/corpus_fixture.py
"""
import hashlib
import json
import pathlib
import random
import struct
import unicodedata

import regex

from gpt2_reference import tiktoken_encoding

OUT = pathlib.Path(__file__).resolve().parents[1] / "data" / "corpus"

STOPWORDS = ["e", "de", "que", "o", "a", "em", "com", "para", "um", "uma"]
RULES = dict(
    min_words=50, max_words=100000, mwl_min=3.0, mwl_max=10.0, symbol=0.1, bullet=0.9,
    ellipsis=0.3, alpha=0.8, stop_hits=2, dup_line=0.2, dup_para=0.3,
    ngram={2: 0.20, 3: 0.18, 4: 0.16}, unique=200,
)
EOS = 50256

WORDS = """
casa cidade governo escola trabalho pessoa tempo mundo vida país dia ano semana
mês história ciência cultura música floresta rio montanha praia estrada ponte
janela porta livro jornal notícia pesquisa universidade professor estudante
médico hospital saúde doença remédio alimento comida água energia petróleo
economia mercado empresa produto serviço cliente contrato lei justiça tribunal
eleição votação deputado senador prefeito ministro presidente política partido
futebol campeonato jogador torcida estádio vitória derrota empate gol técnico
chuva sol vento nuvem tempestade calor frio inverno verão outono primavera
árvore flor fruta semente raiz folha animal pássaro peixe cavalo cachorro gato
computador programa sistema rede internet dados informação tecnologia máquina
carro ônibus trem avião viagem turismo hotel restaurante cozinha receita sabor
família criança jovem adulto idoso mãe pai filho filha irmão irmã avô avó
amizade amor saudade alegria tristeza medo coragem esperança sonho memória
idioma palavra frase texto leitura escrita gramática poesia romance autor
pintura teatro cinema filme ator atriz festival carnaval samba bossa nova
agricultura colheita fazenda gado soja café açúcar milho feijão arroz mandioca
indústria fábrica operário salário imposto orçamento dívida crédito banco
bairro rua praça mercado feira vizinho comunidade associação sindicato
oceano ilha costa litoral porto navio pescador barco onda areia concha
planeta estrela galáxia universo satélite foguete astronauta órbita lua
""".split()
VERBS = """
construiu descobriu apresentou decidiu anunciou publicou venceu perdeu criou
mostrou organizou encontrou comprou vendeu aprendeu ensinou visitou defendeu
explicou investigou registrou celebrou enfrentou protegeu ampliou reduziu
""".split()
ADJS = """
grande pequeno novo antigo importante famoso bonito difícil simples rápido
lento forte fraco moderno tradicional popular brasileiro nacional regional
local público privado histórico econômico social cultural natural urbano rural
""".split()
CONNECTORS = ["e", "de", "que", "o", "a", "em", "com", "para", "um", "uma",
              "no", "na", "do", "da", "pelo", "pela", "os", "as", "ao", "mas"]
LONG_WORDS = """
inconstitucionalidade desenvolvimentismo responsabilização internacionalização
descentralização institucionalização comercialização industrialização
otorrinolaringologista paralelepípedo extraordinariamente consequentemente
independentemente desproporcionalmente interdisciplinaridade
""".split()
NO_STOP = [w for w in WORDS + VERBS + ADJS if w not in STOPWORDS]

WS = regex.compile(r"\p{White_Space}+")


def syllable_word(rng):
    syl = ["ba", "ce", "di", "fo", "gu", "la", "me", "ni", "po", "ru", "sa", "te",
           "vi", "zo", "tra", "pre", "cla", "stro", "ção", "nho", "lhe", "rão"]
    return "".join(rng.choice(syl) for _ in range(rng.randint(2, 4)))


def sentence(rng, n=None, pool=None, extra=0.0):
    n = n or rng.randint(8, 16)
    out = []
    for i in range(n):
        r = rng.random()
        if pool is not None:
            out.append(rng.choice(pool))
        elif r < 0.30:
            out.append(rng.choice(CONNECTORS))
        elif r < 0.30 + extra:
            out.append(syllable_word(rng))
        elif r < 0.75:
            out.append(rng.choice(WORDS))
        elif r < 0.88:
            out.append(rng.choice(ADJS))
        else:
            out.append(rng.choice(VERBS))
    out[0] = out[0][:1].upper() + out[0][1:]
    return " ".join(out) + "."


def paragraphs(rng, n_words, extra=0.25, pool=None):
    lines, words = [], 0
    while words < n_words:
        para = " ".join(sentence(rng, pool=pool, extra=extra) for _ in range(rng.randint(2, 4)))
        lines.append(para)
        words += len(para.split())
    return lines


def join(rng, lines):
    out = lines[0]
    for line in lines[1:]:
        out += ("\n\n" if rng.random() < 0.5 else "\n") + line
    return out


# --- document families -------------------------------------------------------

def kept(rng):
    return join(rng, paragraphs(rng, rng.randint(420, 650), extra=0.35))


def short(rng):
    return join(rng, paragraphs(rng, rng.randint(5, 40)))


def mean_short(rng):
    tiny = ["a", "e", "o", "é", "um", "de", "em", "no", "na", "ao", "os", "as", "se", "já", "só"]
    return join(rng, [" ".join(rng.choice(tiny) for _ in range(rng.randint(12, 20))) + "."
                      for _ in range(rng.randint(5, 9))])


def mean_long(rng):
    return join(rng, [" ".join(rng.choice(LONG_WORDS) for _ in range(rng.randint(10, 16))) + "."
                      for _ in range(rng.randint(5, 8))])


def symbols(rng):
    lines = paragraphs(rng, rng.randint(120, 250))
    out = []
    for line in lines:
        words = line.split(" ")
        for i in range(len(words)):
            if rng.random() < 0.25:
                words[i] = "#" + words[i]
        out.append(" ".join(words))
    return join(rng, out)


def bullets(rng):
    marks = ["- ", "* ", "• ", "● "]
    lines = [rng.choice(marks) + sentence(rng) for _ in range(rng.randint(12, 25))]
    return "\n".join(lines)


def ellipsis(rng):
    lines = []
    for _ in range(rng.randint(8, 14)):
        s = sentence(rng, n=rng.randint(18, 24))
        if rng.random() < 0.6:
            s = s[:-1] + rng.choice(["...", "…"])
        lines.append(s)
    return "\n".join(lines)


def numeric(rng):
    lines = paragraphs(rng, rng.randint(100, 200))
    out = []
    for line in lines:
        words = line.split(" ")
        for i in range(len(words)):
            if rng.random() < 0.35:
                words[i] = rng.choice([str(rng.randint(0, 99999)), f"{rng.randint(0, 999)},{rng.randint(0, 99)}",
                                       f"{rng.randint(1, 31)}/{rng.randint(1, 12)}"])
        out.append(" ".join(words))
    return join(rng, out)


def no_stopwords(rng):
    return join(rng, paragraphs(rng, rng.randint(120, 300), pool=NO_STOP))


def dup_lines(rng):
    base = paragraphs(rng, rng.randint(150, 300))
    repeated = rng.choice(base)
    lines = base + [repeated] * rng.randint(3, 6)
    rng.shuffle(lines)
    return "\n".join(lines)


def ngram_doc(rng, n):
    phrases = {
        2: ["produção agrícola", "energia elétrica", "saúde pública", "ensino superior"],
        3: ["banco central brasileiro", "produto interno bruto", "ministério da educação"],
        4: ["supremo tribunal federal brasileiro", "sistema único de saúde",
            "instituto nacional de pesquisas"],
    }[n]
    phrase = rng.choice(phrases)
    share = {2: 0.26, 3: 0.23, 4: 0.21}[n]
    lines = paragraphs(rng, rng.randint(300, 450), extra=0.45)
    words = " ".join(lines).split(" ")
    total = sum(len(w) for w in words)
    k = int(share * total / len(phrase.replace(" ", ""))) + 1
    out_lines = []
    for line in lines:
        out_lines.append(line.split(" "))
    for _ in range(k):
        li = rng.randrange(len(out_lines))
        pos = rng.randrange(1, len(out_lines[li]))
        out_lines[li][pos:pos] = phrase.split(" ")
    return join(rng, [" ".join(l) for l in out_lines])


def few_unique(rng):
    return join(rng, paragraphs(rng, rng.randint(55, 110), extra=0.0))


# --- corruptions -------------------------------------------------------------

def mojibake(rng, clean):
    return clean.encode("utf-8").decode("cp1252")


def html(rng, clean):
    ents = {"é": "&eacute;", "ç": "&ccedil;", "ã": "&#227;", "õ": "&#xF5;", "á": "&aacute;"}
    out = []
    for line in clean.split("\n"):
        if not line:
            out.append(line)
            continue
        words = line.split(" ")
        for i in range(len(words)):
            if rng.random() < 0.1:
                words[i] = "<b>" + words[i] + "</b>"
        line = " ".join(words)
        line = "".join(ents[c] if c in ents and rng.random() < 0.5 else c for c in line)
        out.append("<p>" + line + "</p>")
    return "<!DOCTYPE html>" + "\n".join(out) + "<br/>"


def nfd(rng, clean):
    return unicodedata.normalize("NFD", clean)


def controls(rng, clean):
    out = []
    for c in clean:
        out.append(c)
        if rng.random() < 0.02:
            out.append(rng.choice(["\x00", "\x07", "\x1b", "\x7f", "\x0b", "\x08"]))
    return "".join(out)


def crlf(rng, clean):
    return clean.replace("\n", "\r\n")


# --- the naive rules ---------------------------------------------------------

def is_punct(c):
    return unicodedata.category(c).startswith("P")


def words_of(text):
    return [w for w in WS.split(text) if w]


def fold(word):
    b, e = 0, len(word)
    while b < e and is_punct(word[b]):
        b += 1
    while e > b and is_punct(word[e - 1]):
        e -= 1
    return word[b:e].lower()


def nonblank_lines(text):
    return [l for l in text.split("\n") if WS.sub("", l)]


def dup_fraction(blocks):
    total = sum(len(b) for b in blocks)
    dup = sum(len(b) for b in blocks if blocks.count(b) > 1)
    return dup / total if total else 0.0


def paragraphs_of(text):
    paras, cur = [], []
    for line in text.split("\n"):
        if WS.sub("", line):
            cur.append(line)
        elif cur:
            paras.append("\n".join(cur))
            cur = []
    if cur:
        paras.append("\n".join(cur))
    return paras


def top_ngram_fraction(words, n):
    total = sum(len(w) for w in words)
    if len(words) < n or total == 0:
        return 0.0
    grams = [tuple(words[i:i + n]) for i in range(len(words) - n + 1)]
    best_count = max(grams.count(g) for g in set(grams))
    best = 0
    for g in dict.fromkeys(grams):
        starts = [i for i, h in enumerate(grams) if h == g]
        if len(starts) != best_count:
            continue
        covered = set()
        for s in starts:
            covered.update(range(s, s + n))
        best = max(best, sum(len(words[i]) for i in covered))
    return best / total


def verdict(text, enc):
    words = words_of(text)
    n = len(words)
    if n == 0 or n < RULES["min_words"] or n > RULES["max_words"]:
        return "length", None
    mwl = sum(len(w) for w in words) / n
    if mwl < RULES["mwl_min"] or mwl > RULES["mwl_max"]:
        return "mean_word_length", None
    symbols = text.count("#") + text.count("…") + text.count("...")
    if symbols / n > RULES["symbol"]:
        return "symbol_ratio", None
    lines = [regex.sub(r"^\p{White_Space}+|\p{White_Space}+$", "", l) for l in nonblank_lines(text)]
    bullets = sum(1 for l in lines if l.startswith(("•", "●", "○", "◦", "▪", "▫", "‣", "⁃", "-", "*")))
    if lines and bullets / len(lines) > RULES["bullet"]:
        return "bullet_fraction", None
    ell = sum(1 for l in lines if l.endswith(("…", "...")))
    if lines and ell / len(lines) > RULES["ellipsis"]:
        return "ellipsis_fraction", None
    alpha = sum(1 for w in words if any(c.isalpha() for c in w))
    if alpha / n < RULES["alpha"]:
        return "alpha_fraction", None
    if sum(1 for w in words if fold(w) in STOPWORDS) < RULES["stop_hits"]:
        return "stopwords", None
    if dup_fraction(nonblank_lines(text)) > RULES["dup_line"]:
        return "dup_line_fraction", None
    if dup_fraction(paragraphs_of(text)) > RULES["dup_para"]:
        return "dup_para_fraction", None
    for k in (2, 3, 4):
        if top_ngram_fraction(words, k) > RULES["ngram"][k]:
            return f"top_{k}gram_fraction", None
    tokens = enc.encode_ordinary(text)
    if len(set(tokens)) < RULES["unique"]:
        return "unique_tokens", None
    return "none", tokens


PLAN = (
    [("none", kept, None)] * 50
    + [("none", kept, c) for c in (mojibake, html, nfd, controls, crlf, "invalid") for _ in range(5)]
    + [("length", short, None)] * 10 + [("length", short, html)] * 2
    + [("mean_word_length", mean_short, None)] * 5 + [("mean_word_length", mean_long, None)] * 5
    + [("symbol_ratio", symbols, None)] * 10
    + [("bullet_fraction", bullets, None)] * 10
    + [("ellipsis_fraction", ellipsis, None)] * 10
    + [("alpha_fraction", numeric, None)] * 10
    + [("stopwords", no_stopwords, None)] * 10
    + [("dup_line_fraction", dup_lines, None)] * 10
    + [("top_2gram_fraction", lambda r: ngram_doc(r, 2), None)] * 8
    + [("top_3gram_fraction", lambda r: ngram_doc(r, 3), None)] * 8
    + [("top_4gram_fraction", lambda r: ngram_doc(r, 4), None)] * 8
    + [("unique_tokens", few_unique, None)] * 10 + [("unique_tokens", few_unique, mojibake)] * 4
)


def main():
    assert len(PLAN) == 200, len(PLAN)
    rng = random.Random(20230526)
    enc = tiktoken_encoding()
    order = list(range(len(PLAN)))
    rng.shuffle(order)

    records, ledger, packed = [], [], bytearray()
    counts = {}
    tokens_emitted = 0
    for idx, plan_i in enumerate(order):
        intended, family, corruption = PLAN[plan_i]
        doc_id = f"doc-{idx:03d}"
        for attempt in range(50):
            clean = unicodedata.normalize("NFC", family(rng))
            if corruption == "invalid":
                words = clean.split(" ")
                for i in rng.sample(range(1, len(words)), 3):
                    words[i] = words[i][:2] + "�" + words[i][2:]
                clean = " ".join(words)
            reason, tokens = verdict(clean, enc)
            if reason == intended:
                break
        else:
            raise SystemExit(f"{doc_id}: could not build a '{intended}' document")

        if corruption is None or corruption == "invalid":
            raw = clean
        else:
            raw = corruption(rng, clean)
            assert raw != clean
        line = json.dumps({"id": doc_id, "text": raw}, ensure_ascii=False).encode("utf-8")
        if corruption == "invalid":
            line = line.replace("�".encode("utf-8"), b"\xff")
        records.append(line)

        counts[reason] = counts.get(reason, 0) + 1
        ledger.append([doc_id, reason])
        if tokens is not None:
            packed += struct.pack(f"<{len(tokens) + 1}I", *tokens, EOS)
            tokens_emitted += len(tokens) + 1

    (OUT / "fixture.jsonl").write_bytes(b"\n".join(records) + b"\n")
    golden = {
        "docs_in": len(records),
        "docs_kept": counts.get("none", 0),
        "rejected": {k: v for k, v in sorted(counts.items()) if k != "none"},
        "tokens_emitted": tokens_emitted,
        "packed_sha256": hashlib.sha256(bytes(packed)).hexdigest(),
        "eos_id": EOS,
        "ledger": ledger,
    }
    (OUT / "golden.json").write_text(json.dumps(golden, indent=1) + "\n")
    print(json.dumps({k: v for k, v in golden.items() if k != "ledger"}, indent=1))


if __name__ == "__main__":
    main()
