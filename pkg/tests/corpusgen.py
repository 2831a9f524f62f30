"""Deterministic builder for realistic logically formatted articles.

Every document is seeded by its index, classifies as logical, and varies
front-matter command style, author/affiliation shape, accents, math
density and body structure.
"""

from __future__ import annotations

import random

FIRST = [
    "Alice", "Bob", "Carla", "Daniel", "Elena", "Fran\\c{c}ois", "Gustav",
    "Hana", "Igor", "Jun", "Katalin", "L\\'aszl\\'o", "Mar\\'ia", "Nikolai",
    "Olga", "P\\'al", "Qing", "Rosa", "S\\o ren", "Tam\\'as", "Ulrike",
    "Viktor", "Wei", "Xo\\'an", "Yuki", "Zo\\\"e",
]
LAST = [
    "Smith", "Johnson", "Garc\\'ia", "M\\\"uller", "Erd\\H{o}s", "Nov\\'ak",
    "Kowalski", "Rossi", "Tanaka", "Okafor", "Lindqvist", "Petrov",
    "de Vries", "van den Berg", "Costa", "Nilsen", "Horv\\'ath", "Dubois",
    "Castellanos", "Brown", "Olsen", "Varga", "Santos", "Kim", "N\\'emeth",
]
INSTITUTION_HEADS = [
    "Department of Mathematics", "Institute for Theoretical Physics",
    "School of Computing", "Laboratory of Applied Analysis",
    "Center for Data Science", "Department of Astronomy",
    "Institute of Statistical Science", "Faculty of Engineering",
    "Centre for Quantum Technologies", "Department of Biology",
]
INSTITUTION_TAILS = [
    "University of Westfield", "Eastbrook University", "Northgate Institute of Technology",
    "University of the Southern Plains", "Riverton State University",
    "Polytechnic University of Almadena", "Kingsbridge College",
    "University of New Harbour", "Midland Technical University",
    "Lakeshore University",
]
CITIES = [
    "Westfield", "Almadena", "New Harbour", "Riverton", "Kingsbridge",
    "Eastbrook", "Northgate", "Lakeshore", "Midland", "Greyton",
]

TITLE_HEADS = [
    "On the Stability of", "Asymptotic Behaviour of", "A Note on",
    "Spectral Properties of", "Convergence Rates for", "On the Geometry of",
    "Finite Approximations of", "A Variational Approach to",
    "Entropy Bounds for", "Regularity Results for",
]
TITLE_BODIES = [
    "Coupled Oscillator Networks", "Random Walks on Expander Graphs",
    "Nonlinear Diffusion Equations", "Sparse Matrix Factorizations",
    "Periodic Orbits in Dissipative Systems", "Interacting Particle Systems",
    "Low-Rank Tensor Completions", "Stochastic Gradient Flows",
    "Quasilinear Elliptic Problems", "Kinetic Transport Models",
]
TITLE_TAILS = [
    "", "", "with Boundary Constraints", "under Weak Mixing",
    "in the Mean-Field Limit", "with Applications to Imaging",
    "on Compact Manifolds", "at Criticality",
]
TITLE_MATH_TAILS = ["on $S^2$", "in $L^p$ Spaces", "for $n$-Body Problems"]

ABSTRACT_OPENERS = [
    "We study {SUBJ} and establish quantitative bounds on their long-time behaviour.",
    "This paper analyses {SUBJ} from a variational point of view.",
    "We introduce a new framework for {SUBJ} based on layered approximations.",
    "Motivated by recent experiments, we revisit {SUBJ} in a discrete setting.",
]
ABSTRACT_SUBJECTS = [
    "coupled oscillator networks", "random walks on sparse graphs",
    "nonlinear diffusion fronts", "interacting particle systems",
    "stochastic gradient dynamics", "kinetic transport models",
]
ABSTRACT_MIDDLES = [
    "Our main result shows that the relevant functional decreases along trajectories at an explicit rate, which improves previously known estimates by a logarithmic factor.",
    "The key ingredient is a coupling argument combined with a refined spectral estimate for the linearized operator near equilibrium.",
    "Under mild moment assumptions we prove existence, uniqueness and continuous dependence on the data, and we quantify the approximation error of the discrete scheme.",
    "The proof combines an energy method with a compactness argument, and the constants are tracked explicitly throughout.",
]
ABSTRACT_MATH_MIDDLES = [
    "In particular we show that the mixing time scales like $n \\log n$ up to constants depending only on the degree bound.",
    "We obtain decay of order $t^{-1/2}$ in the energy norm, and the rate is sharp on a dense class of initial data.",
]
ABSTRACT_CLOSERS = [
    "Several numerical experiments illustrate the sharpness of the bounds.",
    "We close with a list of open problems suggested by the analysis.",
    "Applications to consensus dynamics and to sampling are discussed.",
    "The method extends to higher dimensions with only notational changes.",
]

SECTION_NAMES = [
    "Introduction", "Preliminaries", "Main Results", "Proof of the Main Theorem",
    "Numerical Experiments", "Applications", "Discussion", "Concluding Remarks",
    "Model and Notation", "Stability Analysis", "The Discrete Scheme",
    "Examples", "Related Work",
]
SUBSECTION_NAMES = [
    "Notation", "Assumptions", "The linear case", "A counterexample",
    "Sharpness", "Proof strategy", "Implementation details", "Extensions",
]

BODY_SENTENCES = [
    "Throughout the paper we assume that the underlying graph is connected and locally finite.",
    "The constant in the estimate depends only on the dimension and on the ellipticity ratio.",
    "A short computation shows that the drift term is dominated by the dissipation.",
    "We will make repeated use of the triangle inequality in the form stated above.",
    "The argument follows a classical pattern, but the details require some care.",
    "For completeness we sketch the proof, which is otherwise standard.",
    "It is convenient to rescale time so that the leading coefficient equals one.",
    "The boundary terms vanish after integration by parts.",
    "This observation will be the starting point of the next section.",
    "The case of equality is characterized by a rigidity argument.",
    "An inspection of the proof shows that the assumption can be weakened.",
    "We emphasize that no smallness condition is imposed on the initial data.",
]
EMPH_WORDS = [
    "a priori", "uniformly", "local", "global", "generic", "sharp",
    "monotone", "stable", "almost surely", "essential",
]
MATH_INLINE = [
    "$u_t = \\Delta u + f(u)$", "$\\lambda_1 > 0$", "$x \\in \\Omega$",
    "$\\|u\\|_{L^2} \\le C$", "$n \\to \\infty$", "$0 < t < T$",
    "$\\sum_k a_k^2 < \\infty$", "$P(X > t) \\le e^{-ct}$",
]
DISPLAY_MATH = [
    "\\begin{equation}\n  \\frac{d}{dt} E(t) \\le -c\\, E(t) + C e^{-t}\n\\end{equation}",
    "\\[\n  \\int_\\Omega |\\nabla u|^2 \\, dx \\ge \\lambda_1 \\int_\\Omega u^2 \\, dx\n\\]",
    "\\begin{align}\n  a_{n+1} &= a_n - \\eta \\nabla F(a_n), \\\\\n  b_{n+1} &= b_n + \\eta^2 \\|\\nabla F(a_n)\\|^2\n\\end{align}",
]


def _pick(rng: random.Random, pool: list[str]) -> str:
    return pool[rng.randrange(len(pool))]


def make_title(rng: random.Random) -> str:
    title = f"{_pick(rng, TITLE_HEADS)} {_pick(rng, TITLE_BODIES)}"
    if rng.random() < 0.12:
        title += " " + _pick(rng, TITLE_MATH_TAILS)
    else:
        tail = _pick(rng, TITLE_TAILS)
        if tail:
            title += " " + tail
    return title


def make_name(rng: random.Random) -> str:
    name = f"{_pick(rng, FIRST)} {_pick(rng, LAST)}"
    if rng.random() < 0.2:
        initial = chr(ord("A") + rng.randrange(26))
        parts = name.split(" ", 1)
        name = f"{parts[0]} {initial}. {parts[1]}"
    return name


def make_institution(rng: random.Random) -> str:
    head = _pick(rng, INSTITUTION_HEADS)
    tail = _pick(rng, INSTITUTION_TAILS)
    if rng.random() < 0.5:
        return f"{head}, {tail}"
    return f"{head}, {tail}, {_pick(rng, CITIES)}"


def make_abstract(rng: random.Random) -> str:
    parts = [
        _pick(rng, ABSTRACT_OPENERS).replace("{SUBJ}", _pick(rng, ABSTRACT_SUBJECTS)),
        _pick(rng, ABSTRACT_MIDDLES),
    ]
    if rng.random() < 0.4:
        parts.append(_pick(rng, ABSTRACT_MATH_MIDDLES))
    parts.append(_pick(rng, ABSTRACT_CLOSERS))
    return "\n".join(parts)


def make_paragraph(rng: random.Random, emph_allowed: bool = True) -> str:
    n = rng.randrange(2, 5)
    sentences = [_pick(rng, BODY_SENTENCES) for _ in range(n)]
    if emph_allowed and rng.random() < 0.5:
        k = rng.randrange(len(sentences))
        word = _pick(rng, EMPH_WORDS)
        sentences[k] = sentences[k][:-1] + f", which is \\emph{{{word}}}."
    if rng.random() < 0.5:
        k = rng.randrange(len(sentences))
        sentences[k] = sentences[k][:-1] + f" whenever {_pick(rng, MATH_INLINE)}."
    return " ".join(sentences)


def make_document(index: int) -> str:
    rng = random.Random(10_000 + index)
    title = make_title(rng)
    n_authors = rng.choice([1, 1, 2, 2, 3, 4])
    n_affs = rng.choice([0, 1, 1, 1, 2, 2, 3])
    n_affs = min(n_affs, max(1, n_authors)) if n_affs else 0
    names = []
    while len(names) < n_authors:
        nm = make_name(rng)
        if nm not in names:
            names.append(nm)
    affs = []
    while len(affs) < n_affs:
        a = make_institution(rng)
        if a not in affs:
            affs.append(a)
    # author -> affiliation indices
    edges: list[list[int]] = []
    for i in range(n_authors):
        if not affs:
            edges.append([])
        elif rng.random() < 0.15 and len(affs) > 1:
            edges.append(sorted(rng.sample(range(len(affs)), 2)))
        else:
            edges.append([rng.randrange(len(affs))])
    for j in range(len(affs)):  # every affiliation used at least once
        if not any(j in e for e in edges):
            edges[rng.randrange(n_authors)].append(j)
            edges[-1].sort()

    author_style = rng.choice(["thanks", "thanks", "affiliation", "plain"])
    if not affs:
        author_style = "plain"

    lines: list[str] = []
    lines.append("\\documentclass[11pt]{article}")
    if rng.random() < 0.5:
        lines.append("\\usepackage{amsmath,amssymb}")
    if rng.random() < 0.3:
        lines.append("\\usepackage[T1]{fontenc}")
    use_theorems = rng.random() < 0.35
    if use_theorems:
        lines.append("\\newtheorem{theorem}{Theorem}")
        lines.append("\\newtheorem{lemma}{Lemma}")
    lines.append("")

    def author_block() -> list[str]:
        out = []
        if author_style == "thanks":
            entries = []
            for nm, e in zip(names, edges):
                entry = nm + "".join(f"\\thanks{{{affs[j]}}}" for j in e)
                entries.append(entry)
            out.append("\\author{" + " \\and ".join(entries) + "}")
        elif author_style == "affiliation":
            for nm, e in zip(names, edges):
                out.append(f"\\author{{{nm}}}")
                for j in e:
                    out.append(f"\\affiliation{{{affs[j]}}}")
        else:
            out.append("\\author{" + ", ".join(names) + "}")
        return out

    preamble_fm = rng.random() < 0.7
    if preamble_fm:
        lines.append(f"\\title{{{title}}}")
        lines.extend(author_block())
        if rng.random() < 0.4:
            lines.append("\\date{}")
        lines.append("")
    lines.append("\\begin{document}")
    lines.append("")
    if not preamble_fm:
        lines.append(f"\\title{{{title}}}")
        lines.extend(author_block())
        lines.append("")
    abstract_first = rng.random() < 0.25
    abstract = make_abstract(rng)
    if abstract_first:
        lines.append("\\begin{abstract}")
        lines.append(abstract)
        lines.append("\\end{abstract}")
        lines.append("")
        lines.append("\\maketitle")
    else:
        lines.append("\\maketitle")
        lines.append("")
        lines.append("\\begin{abstract}")
        lines.append(abstract)
        lines.append("\\end{abstract}")
    lines.append("")

    n_sections = rng.randrange(3, 6)
    used = rng.sample(SECTION_NAMES, n_sections)
    for si, sec in enumerate(used):
        lines.append(f"\\section{{{sec}}}")
        lines.append("")
        for _ in range(rng.randrange(1, 3)):
            lines.append(make_paragraph(rng))
            lines.append("")
        if rng.random() < 0.4:
            lines.append(_pick(rng, DISPLAY_MATH))
            lines.append("")
        if use_theorems and rng.random() < 0.4:
            env = rng.choice(["theorem", "lemma"])
            lines.append(f"\\begin{{{env}}}")
            lines.append(make_paragraph(rng, emph_allowed=False))
            lines.append(f"\\end{{{env}}}")
            lines.append("")
        if rng.random() < 0.3 and si > 0:
            sub = _pick(rng, SUBSECTION_NAMES)
            lines.append(f"\\subsection{{{sub}}}")
            lines.append("")
            lines.append(make_paragraph(rng))
            lines.append("")
    if rng.random() < 0.3:
        lines.append("\\begin{itemize}")
        for _ in range(rng.randrange(2, 4)):
            lines.append(f"\\item {_pick(rng, BODY_SENTENCES)}")
        lines.append("\\end{itemize}")
        lines.append("")
    if rng.random() < 0.2:
        lines.append("A reference implementation is available as \\verb|solver --fast|.")
        lines.append("")
    if rng.random() < 0.4:
        lines.append("\\begin{thebibliography}{9}")
        lines.append("\\bibitem{first} A.~Author, \\emph{On a related problem}, "
                     "Journal of Examples 12 (2019), 345--367.")
        lines.append("\\bibitem{second} B.~Writer and C.~Scholar, "
                     "\\emph{Another perspective}, Annals of Samples 3 (2021), 1--20.")
        lines.append("\\end{thebibliography}")
        lines.append("")
    lines.append("\\end{document}")
    return "\n".join(lines) + "\n"


def build_corpus(count: int, start: int = 0) -> list[tuple[str, str]]:
    return [(f"doc{start + i:04d}.tex", make_document(start + i)) for i in range(count)]
