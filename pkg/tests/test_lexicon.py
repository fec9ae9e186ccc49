import pytest

from sumosim import lexicon, ontology
from sumosim.kif import Variable
from sumosim.lexicon import (
    EventSort, LexicalEntry, LexiconError, MissingQualia, PartonomyNode, Partonomy, TelicMode,
    UnknownPart,
)
from sumosim.rules import infer_closure


def entry(text):
    (e,) = lexicon.parse_lexicon(text)
    return e


def test_parse_full_entry():
    e = entry("(lexentry Bakery (formal Business) (telic Selling direct) (constitutive Oven Human)"
              " (agentive Constructing) (event TRANSITION Baking Selling)"
              " (args (agent Organization)) (inherits Business))")
    assert e == LexicalEntry("Bakery", formal="Business", telic="Selling",
                             telic_mode=TelicMode.DIRECT, constitutive=frozenset({"Oven", "Human"}),
                             agentive="Constructing", event_sort=EventSort.TRANSITION,
                             subevents=("Baking", "Selling"),
                             argument_structure=(("agent", "Organization"),),
                             inheritance=frozenset({"Business"}))


@pytest.mark.parametrize("text", [
    "(lexentry)",
    "(notentry Bakery)",
    "(lexentry Bakery (flavour Sweet))",
    "(lexentry Bakery (event SOMETIMES))",
    "(lexentry Bakery (telic Selling sideways))",
    "(lexentry Bakery (formal A B))",
    "(lexentry Bakery (formal A) (formal B))",
    "(lexentry Bakery (args agent))",
])
def test_malformed_entries(text):
    with pytest.raises(LexiconError):
        entry(text)


@pytest.mark.parametrize("text,field", [
    ("(lexentry Bakery (formal Business) (telic Frobbing))", "telic"),
    ("(lexentry Bakery (formal Business) (telic Oven))", "telic"),
    ("(lexentry Bakery (formal Unicorn))", "formal"),
    ("(lexentry Bakery)", "formal"),
    ("(lexentry Selling (formal FinancialTransaction) (constitutive Oven))", "constitutive"),
    ("(lexentry Bakery (formal Business) (inherits Shop))", "inherits"),
    ("(lexentry Baking (formal Cooking) (event TRANSITION Kneading))", "event"),
    ("(lexentry Baking (formal Cooking) (args (chef Human)))", "args"),
])
def test_single_violation(kb, text, field):
    (v,) = lexicon.validate_entry(entry(text), kb, {})
    assert v.field == field


def test_valid_with_entries(kb):
    business = entry("(lexentry Business (formal Organization))")
    bakery = entry("(lexentry Bakery (formal Business) (inherits Business))")
    assert lexicon.validate_entry(bakery, kb, {"Business": business}) == []


def test_rule_shapes():
    rule = lexicon.entry_to_rule(entry("(lexentry Food (formal SelfConnectedObject) (telic Eating indirect))"))
    x, telic = Variable("X"), Variable("TELIC")
    assert rule.name == "lex:Food"
    assert rule.consequent == (("instance", x, "SelfConnectedObject"), ("instance", telic, "Eating"),
                               ("patient", telic, x))
    bare = lexicon.entry_to_rule(entry("(lexentry Oven (formal HeatingDevice))"))
    assert bare.consequent == (("instance", x, "HeatingDevice"),) and bare.existentials == ()
    with pytest.raises(MissingQualia):
        lexicon.entry_to_rule(entry("(lexentry Oven (agentive Making))"))


def test_generated_rule_runs(kb):
    e = entry("(lexentry Engine (formal Transducer) (constitutive Piston Crankshaft))")
    out = infer_closure({("instance", "e1", "Engine")}, [lexicon.entry_to_rule(e)], kb).store
    assert ("instance", "sk_PART1_1", "Crankshaft") in out
    assert ("part", "sk_PART2_1", "e1") in out


# -- partonomy ---------------------------------------------------------------

@pytest.fixture(scope="module")
def tree(kb):
    return lexicon.build_partonomy(kb, "Vehicle")


def test_partonomy_shape(tree):
    assert tree.root.cls == "Vehicle"
    assert {c.cls for c in tree.root.children} == {"MotorVehicle", "Bicycle", "Sailboat"}
    assert tree.inherited_parts("GasolineTruck") == {"SteeringWheel", "SparkPlug", "CargoBed"}


def test_narrow_matches_brute_force(tree):
    # a class survives iff the part is on the chain from the root down to it
    for part in sorted(tree.parts):
        expected = set()
        for cls in tree.classes:
            chain, c = [], cls
            while c is not None:
                chain.append(c)
                c = tree.parent.get(c)
            if any(part in tree.nodes[c].distinguishing_parts for c in chain):
                expected.add(cls)
        assert lexicon.narrow(tree.classes, part, tree) == expected


def test_narrow_errors_and_edges(tree):
    with pytest.raises(UnknownPart):
        lexicon.narrow({"Bicycle"}, "Propeller", tree)
    with pytest.raises(ontology.UnknownTerm):
        lexicon.narrow({"Spaceship"}, "Pedal", tree)
    assert lexicon.narrow(set(), "Pedal", tree) == set()
    assert lexicon.narrow({"Bicycle", "Sailboat"}, "SteeringWheel", tree) == set()


def test_overlapping_children_rejected():
    shared = PartonomyNode("Shared")
    with pytest.raises(ValueError):
        Partonomy(PartonomyNode("Root", children=(PartonomyNode("A", children=(shared,)),
                                                  PartonomyNode("B", children=(shared,)))))


def test_shipped_lexicon_rules_emit(kb):
    for e in lexicon.parse_lexicon(ontology.shipped_text(ontology.LEXICON)):
        rule = lexicon.entry_to_rule(e)
        assert rule.antecedent == (("instance", Variable("X"), e.headword),)
