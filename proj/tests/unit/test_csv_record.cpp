#include <doctest.h>

#include "emberish/csv.hpp"
#include "emberish/error.hpp"
#include "emberish/record.hpp"
#include "support.hpp"

using namespace emberish;

TEST_CASE("csv reader handles quoting, multiline cells and CRLF")
{
    const auto rows = parse_csv("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].cells == std::vector<std::string>{"x, y", "he said \"hi\""});
    CHECK(rows[2].cells[0] == "multi\nline");
    CHECK(rows[2].line == 3);
    CHECK_THROWS_AS(parse_csv("\"open\n"), ValidationError);
    CHECK(csv_line({"p,q", "r"}) == "\"p,q\",r\n");
}

TEST_CASE("csv dataset takes ids from the id column")
{
    const auto ds = parse_csv_dataset("id,t\n1,a\n2,b", "d", Role::base);
    REQUIRE(ds.size() == 2);
    CHECK(ds[0].id == "1");
    CHECK(ds[0].fields == std::vector<Field>{{"t", "a"}});
    CHECK(ds[1].fields == std::vector<Field>{{"t", "b"}});
    CHECK(ds.column_names() == std::vector<std::string>{"t"});
}

TEST_CASE("csv dataset without an id column numbers rows from zero")
{
    const auto ds = parse_csv_dataset("t,u\na,1\nb,2\n", "d", Role::base);
    CHECK(ds[0].id == "0");
    CHECK(ds[1].id == "1");
}

TEST_CASE("header-only file gives an empty dataset")
{
    CHECK(parse_csv_dataset("id,t\n", "d", Role::base).size() == 0);
}

TEST_CASE("duplicate id is rejected by name")
{
    try {
        parse_csv_dataset("id,t\n1,a\n1,b\n", "d", Role::base);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("duplicate id 1") != std::string::npos);
    }
}

TEST_CASE("malformed row names its line")
{
    try {
        parse_csv_dataset("id,t\n1,a\n2,b,c\n", "d", Role::base);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("jsonl records keep field order and stringify scalars")
{
    const auto ds = parse_jsonl_dataset(
        "{\"id\": \"m1\", \"Title\": \"Dunkirk\", \"Year\": 2017, \"Seen\": true, \"Note\": null}\n",
        "d", Role::auxiliary);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].id == "m1");
    CHECK(ds[0].fields
          == std::vector<Field>{{"Title", "Dunkirk"}, {"Year", "2017"}, {"Seen", "true"}, {"Note", ""}});
    CHECK_THROWS_AS(parse_jsonl_dataset("{\"a\": [1]}\n", "d", Role::base), ValidationError);
}

TEST_CASE("ingestion is lossless under re-serialisation")
{
    const std::string text = "id,title,year\n7,\"A, B\",1999\n8,\"quote \"\"q\"\"\",\n";
    const auto ds = parse_csv_dataset(text, "d", Role::base);
    const auto again = parse_csv_dataset(render_dataset_csv(ds), "d", Role::base);
    CHECK(again.records() == ds.records());
    CHECK(again.column_names() == ds.column_names());
}

TEST_CASE("role change keeps records")
{
    const auto ds = parse_csv_dataset("id,t\n1,a\n", "d", Role::base);
    const auto aux = ds.with_role(Role::auxiliary);
    CHECK(aux.role() == Role::auxiliary);
    CHECK(aux.records() == ds.records());
}

TEST_CASE("supervision kind follows the column count")
{
    const auto pairs = parse_supervision("base_id,aux_id\n1,9\n");
    REQUIRE(pairs.pairs.size() == 1);
    CHECK(pairs.pairs[0] == SupervisionPair{"1", "9"});
    CHECK_FALSE(pairs.is_triples());

    const auto triples = parse_supervision("anchor_id,positive_id,negative_id\n1,9,8\n");
    CHECK(triples.is_triples());
    CHECK(triples.triples[0] == SupervisionTriple{"1", "9", "8"});
    CHECK_THROWS_AS(parse_supervision("anchor_id,positive_id,negative_id\n1,9,9\n"), ValidationError);
}

TEST_CASE("unresolvable supervision rows are all listed")
{
    const auto base = parse_csv_dataset("id,t\n1,a\n", "b", Role::base);
    const auto aux = parse_csv_dataset("id,t\n9,a\n", "a", Role::auxiliary);
    const auto sup = parse_supervision("base_id,aux_id\n1,9\n2,9\n1,5\n");
    try {
        validate_supervision(sup, base, aux);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
    }
}

TEST_CASE("dataset files round-trip through disk")
{
    testing::TempDir dir("record");
    const auto ds = testing::make_dataset("d", Role::base, {{"a", {{"k", "v 1"}}}, {"b", {{"k", ""}}}});
    save_dataset(dir.path() / "d.csv", ds);
    CHECK(load_dataset(dir.path() / "d.csv").records() == ds.records());
    CHECK_THROWS_AS(load_dataset(dir.path() / "missing.csv"), ValidationError);
}
