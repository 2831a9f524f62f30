import pytest

from logicaltex.converter import (
    ConversionPolicy,
    Edit,
    OverlapError,
    RewritePlan,
    Scope,
    apply,
    convert,
)
from logicaltex.detector import DetectionKind
from logicaltex.lexer import Span, parse
from logicaltex.validator import check_body_preservation, validate_structure

from conftest import AGGRESSIVE, FULL_PROFILES, LOGICAL_FIXTURES, METADATA_ONLY, VISUAL_FIXTURES


def wrap(body, preamble=""):
    return f"\\documentclass{{article}}\n{preamble}\n\\begin{{document}}\n{body}\n\\end{{document}}\n"


# ---------------------------------------------------------------------------
# apply
# ---------------------------------------------------------------------------

def test_apply_empty_plan_is_identity():
    src = "anything at all $x$ {\\bf y}"
    assert apply(src, RewritePlan(())) == src


def test_apply_single_edit_preserves_outside_bytes():
    src = "0123456789abcdefghij"
    plan = RewritePlan((Edit(Span(10, 20, 1), "XYZ", "test"),))
    out = apply(src, plan)
    assert out == "0123456789XYZ"
    assert out[:10] == src[:10]


def test_apply_bytes_in_bytes_out():
    src = "caf\xe9 {\\bf x}".encode("utf-8")
    out = apply(src, RewritePlan(()))
    assert out == src and isinstance(out, bytes)


def test_overlapping_edits_rejected():
    with pytest.raises(OverlapError):
        RewritePlan((
            Edit(Span(0, 5, 1), "a", "t"),
            Edit(Span(3, 8, 1), "b", "t"),
        ))


def test_zero_width_insert_before_edit_is_fine():
    plan = RewritePlan((
        Edit(Span(3, 3, 1), "INS", "t"),
        Edit(Span(3, 6, 1), "REP", "t"),
    ))
    assert apply("abcdefgh", plan) == "abcINSREPgh"


# ---------------------------------------------------------------------------
# convert: spec rewrite catalog
# ---------------------------------------------------------------------------

def test_title_rewrite():
    src = wrap("\\centerline{\\bf On Symmetry}\n\nBody text.")
    out, rep = convert(src, AGGRESSIVE)
    assert "\\title{On Symmetry}" in out
    assert "\\centerline" not in out
    kinds = [d.kind for d, _ in rep.applied]
    assert DetectionKind.TITLE in kinds


def test_abstract_rewrite_drops_label_and_wrapper():
    src = wrap(
        "\\centerline{\\bf A Title Of Sorts}\n\n"
        "{\\bf Abstract. }{\\it We prove X.}\n\nBody.")
    out, _ = convert(src, AGGRESSIVE)
    assert "\\begin{abstract}\nWe prove X.\n\\end{abstract}" in out
    assert "{\\bf Abstract" not in out


def test_emphasis_rewrite():
    src = wrap("\\maketitle\n\nAn {\\bf important} point.", preamble="\\title{T}")
    out, rep = convert(src, AGGRESSIVE)
    assert "\\emph{important}" in out
    src2 = wrap("\\maketitle\n\nAn {\\bf important} point.", preamble="\\title{T}")
    out2, rep2 = convert(src2, ConversionPolicy(scope=Scope.FULL))
    assert "\\emph" not in out2
    assert any("threshold" in r for _, r in rep2.skipped)


def test_author_rewrite_with_thanks_and_and():
    src = wrap(
        "\\centerline{\\bf A Title Line Here}\n\n"
        "\\centerline{Alice Smith$^{1}$ and Bob Jones$^{2}$}\n"
        "\\centerline{$^{1}$University of X}\n"
        "\\centerline{$^{2}$Institute of Y}\n\nBody.")
    out, rep = convert(src, AGGRESSIVE)
    assert ("\\author{Alice Smith\\thanks{University of X} "
            "\\and Bob Jones\\thanks{Institute of Y}}") in out
    assert "\\maketitle" in out
    assert "$^{1}$" not in out


def test_author_rewrite_affiliation_command():
    src = wrap(
        "\\centerline{\\bf A Title Line Here}\n\n"
        "\\centerline{Alice Smith$^{1}$ and Bob Jones$^{2}$}\n"
        "\\centerline{$^{1}$University of X}\n"
        "\\centerline{$^{2}$Institute of Y}\n\nBody.")
    pol = ConversionPolicy(scope=Scope.FULL, aggressive=True,
                           affiliation_command="affiliation")
    out, _ = convert(src, pol)
    assert "\\author{Alice Smith}" in out
    assert "\\affiliation{University of X}" in out
    assert "\\author{Bob Jones}" in out
    assert "\\thanks" not in out


def test_author_hygiene_no_marker_renderings():
    import re

    src = wrap(
        "\\centerline{\\bf The Marker Title}\n\n"
        "\\centerline{Ann One$^{1,2}$, Ben Two\\dag}\n"
        "\\centerline{$^{1}$First Institute of Testing}\n"
        "\\centerline{$^{2}$Second University of Checking}\n"
        "\\centerline{\\dag Third Laboratory of Marks}\n\nBody.")
    out, rep = convert(src, AGGRESSIVE)
    m = re.search(r"\\author\{(.*)\}\n", out, re.DOTALL)
    assert m is not None
    content = m.group(1)
    for residue in ("$^", "\\dag", "\\footnotemark", "\\textsuperscript"):
        assert residue not in content, content


def test_theorem_rewrite_gated_and_preamble_note():
    src = wrap("\\maketitle\n\n{\\bf Definition 2.} A nice map commutes.",
               preamble="\\title{T}")
    out_plain, rep_plain = convert(src, ConversionPolicy(scope=Scope.FULL))
    assert "\\begin{definition}" not in out_plain
    assert any("aggressive" in r for _, r in rep_plain.skipped)
    out, _ = convert(src, AGGRESSIVE)
    assert "\\begin{definition}" in out and "\\end{definition}" in out
    assert "\\newtheorem{definition}{Definition}" in out
    assert out.index("\\newtheorem") < out.index("\\begin{document}")


def test_theorem_rewrite_respects_existing_newtheorem():
    src = wrap("\\maketitle\n\n{\\bf Lemma 1.} Statement text here.",
               preamble="\\title{T}\n\\newtheorem{lemma}{Lemma}")
    out, _ = convert(src, AGGRESSIVE)
    assert out.count("\\newtheorem{lemma}") == 1


def test_section_rewrite_strips_number_and_par():
    src = wrap("\\maketitle\n\n\\medskip\\noindent{\\bf 2. Results}\\par\n\nText.",
               preamble="\\title{T}")
    out, _ = convert(src, AGGRESSIVE)
    assert "\\section{Results}" in out
    assert "\\medskip" not in out and "\\section{Results}\\par" not in out


def test_unnumbered_section_becomes_starred():
    src = wrap("\\maketitle\n\n\\textbf{\\large Acknowledgments}\n\nThanks.",
               preamble="\\title{T}")
    out, _ = convert(src, AGGRESSIVE)
    assert "\\section*{Acknowledgments}" in out


def test_already_logical_is_byte_identical():
    for path in LOGICAL_FIXTURES[:6]:
        src = path.read_text()
        out, rep = convert(src, AGGRESSIVE)
        assert out == src, path.name
        assert rep.applied == []


def test_def_maketitle_prevents_duplicate_insertion():
    from conftest import FIXTURES

    src = (FIXTURES / "visual" / "def_maketitle.tex").read_text()
    assert src.count("\\maketitle") == 1
    out, rep = convert(src, AGGRESSIVE)
    assert out.count("\\maketitle") == 1  # only the \def site
    assert "\\title{Custom Title Machinery and Its Preservation}" in out


def test_maketitle_inserted_after_front_matter_before_abstract():
    src = wrap(
        "\\centerline{\\bf Ordered Front Matter}\n\n"
        "\\centerline{Cara Doe}\n\n"
        "{\\bf Abstract. }{\\it Some content of the abstract goes here.}\n\nBody.")
    out, _ = convert(src, AGGRESSIVE)
    assert out.index("\\title{") < out.index("\\author{") \
        < out.index("\\maketitle") < out.index("\\begin{abstract}")


def test_metadata_only_policy_leaves_body_untouched():
    src = wrap(
        "\\centerline{\\bf The Scoped Title}\n\n"
        "\\centerline{Dana Scholar}\n\n"
        "{\\bf Abstract. }{\\it Abstract prose of reasonable length here.}\n\n"
        "\\medskip\\noindent{\\bf 1. Introduction}\\par\n\n"
        "Body with {\\bf old} emphasis.")
    out, rep = convert(src, METADATA_ONLY)
    assert "\\title{The Scoped Title}" in out
    assert "\\medskip\\noindent{\\bf 1. Introduction}\\par" in out
    assert "{\\bf old}" in out
    reasons = {r for _, r in rep.skipped}
    assert any("metadata" in r for r in reasons)


def test_report_covers_every_detection():
    src = wrap(
        "\\centerline{\\bf Coverage Title Here}\n\n"
        "\\centerline{Eve Author}\n\n"
        "{\\bf Abstract. }{\\it Enough abstract content to be detected.}\n\n"
        "\\textbf{\\large 1 Intro}\n\nAn {\\it aside} remark.")
    from logicaltex.detector import detect_all

    dets = detect_all(parse(src))
    for policy in (AGGRESSIVE, METADATA_ONLY, ConversionPolicy(scope=Scope.FULL)):
        _, rep = convert(src, policy)
        covered = {id(d) for d, _ in rep.applied} | {id(d) for d, _ in rep.skipped}
        assert len(rep.applied) + len(rep.skipped) == len(dets.all())
        assert covered == {id(d) for d in detect_all(parse(src)).all()} or \
            len(covered) == len(dets.all())


def test_body_preservation_and_structure_on_visual_fixtures():
    for path in VISUAL_FIXTURES:
        src = path.read_text()
        out, rep = convert(src, AGGRESSIVE)
        ok, off = check_body_preservation(src, out, rep.plan)
        assert ok, (path.name, off)
        assert validate_structure(src, out) == [], path.name


def test_idempotence_on_degraded_corpus(small_corpus):
    from logicaltex.degrader import degrade

    for name, text in small_corpus:
        visual, _ = degrade(text, FULL_PROFILES, 0)
        once, rep1 = convert(visual, AGGRESSIVE)
        twice, rep2 = convert(once, AGGRESSIVE)
        assert twice == once, name
        assert rep2.applied == [], name


def test_malformed_input_still_converts_with_output():
    src = "\\centerline{\\bf Broken Title} {\\it unclosed\n\n\\end{abstract}\n"
    out, rep = convert(src, AGGRESSIVE)
    assert "\\title{Broken Title}" in out
    assert isinstance(rep.warnings, list)


def test_classification_recorded_before_and_after(small_corpus):
    from logicaltex.degrader import degrade
    from logicaltex.detector import DocumentClass

    _, text = small_corpus[0]
    visual, _ = degrade(text, FULL_PROFILES, 0)
    _, rep = convert(visual, AGGRESSIVE)
    assert rep.class_before.label is DocumentClass.VISUAL
    assert rep.class_after.label is DocumentClass.LOGICAL


def test_latin1_bytes_full_recovery():
    doc = (
        "\\documentclass{article}\n\\begin{document}\n\n"
        "\\centerline{\\bf Sur la sym\xe9trie des \xe9quations}\n\n"
        "\\centerline{Ren\xe9 Descartes}\n\n"
        "\\centerline{D\xe9partement de Math\xe9matiques, Universit\xe9 de Paris}\n\n"
        "{\\bf Abstract. }{\\it Nous \xe9tudions la sym\xe9trie des \xe9quations.}\n\n"
        "Corps du texte.\n\\end{document}\n"
    ).encode("latin-1")
    out, rep = convert(doc, AGGRESSIVE)
    assert isinstance(out, bytes)
    text = out.decode("latin-1")
    assert "\\title{Sur la sym\xe9trie des \xe9quations}" in text
    assert ("\\author{Ren\xe9 Descartes\\thanks{D\xe9partement de "
            "Math\xe9matiques, Universit\xe9 de Paris}}") in text
    assert "Corps du texte." in text
    ok, _ = check_body_preservation(doc, out, rep.plan)
    assert ok
