import os
import sys

import hypothesis
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nag.astio import leaf, node
from nag.attrs import VarId
from nag.registry import ApiRegistry, ApiSignature
from nag.semantics import MethodContext

hypothesis.settings.register_profile(
    "default", max_examples=60, deadline=None)
hypothesis.settings.load_profile("default")


def writer_registry() -> ApiRegistry:
    """Registry for the file-writing worked example."""
    return ApiRegistry([
        ApiSignature("FileWriter.<init>", None, "FileWriter", ("File",)),
        ApiSignature("write", "FileWriter", "void", ("String",)),
        ApiSignature("printStackTrace", "IOException", "void", ()),
        ApiSignature("println", "PrintStream", "void", ("String",)),
    ])


def writer_context() -> MethodContext:
    """void write(File f, String str) with no fields, as the worked example
    assumes for its initial symbol table."""
    return MethodContext(
        formals=((VarId("formal", 0), "File"), (VarId("formal", 1), "String")),
        method_ret_type="void",
        registry=writer_registry(),
    )


def lit():
    return leaf("Var", VarId("literal", 0))


def local(i=0):
    return leaf("Var", VarId("local", i))


def formal(i):
    return leaf("Var", VarId("formal", i))


def writer_body():
    """The file-writing body: try { FileWriter var_0 = new FileWriter(f);
    var_0.write(str); } catch (IOException var_0) { var_0.printStackTrace();
    println(ARG); } return;"""
    objinit = node("a4", node(
        "b2", leaf("Type", "FileWriter"), local(0), leaf("Type", "FileWriter"),
        node("b6a", formal(0), node("b6b"))))
    write = node("a5", node(
        "b3", lit(), local(0),
        node("b5", leaf("Api", "write"), node("b6a", formal(1), node("b6b"))),
        node("b4b")))
    pst = node("a5", node(
        "b3", lit(), local(0),
        node("b5", leaf("Api", "printStackTrace"), node("b6b")), node("b4b")))
    println = node("a5", node(
        "b3", lit(), lit(),
        node("b5", leaf("Api", "println"), node("b6a", lit(), node("b6b"))),
        node("b4b")))
    trystmt = node("c1.c", node(
        "c4",
        node("a2a", objinit, write),
        node("c5a", leaf("Type", "IOException"), local(0),
             node("a2a", pst, println), node("c5b"))))
    ret = node("a6", node("b7", lit()))
    return node("a1", node("a2a", trystmt, ret))


@pytest.fixture
def fig_ctx():
    return writer_context()


@pytest.fixture
def fig_body():
    return writer_body()
