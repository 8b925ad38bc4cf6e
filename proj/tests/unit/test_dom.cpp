#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/generator.hpp"
#include "webwrap/dom.hpp"
#include "webwrap/error.hpp"

using namespace webwrap;
using namespace webwrap::dom;

namespace {

NodeId first_element(const Document& doc, const std::string& tag) {
    for (NodeId id : doc.preorder(doc.root())) {
        if (doc[id].is_element() && doc[id].tag == tag) return id;
    }
    return kNoNode;
}

}  // namespace

TEST_CASE("minimal document") {
    auto doc = parse_document("<html><body><p>hi</p></body></html>");
    const Node& root = (*doc)[doc->root()];
    REQUIRE(root.is_root());
    REQUIRE(root.children.size() == 1);
    const Node& html = (*doc)[root.children[0]];
    CHECK(html.tag == "html");
    NodeId p = first_element(*doc, "p");
    REQUIRE(p != kNoNode);
    CHECK((*doc)[(*doc)[p].parent].tag == "body");
    auto texts = text_segments(*doc, p);
    REQUIRE(texts.size() == 1);
    CHECK(texts[0] == RankedText{"hi", 1});
}

TEST_CASE("text ranks count direct segments only") {
    auto doc = parse_document("<div>start<p>example</p>end \n </div>");
    NodeId div = first_element(*doc, "div");
    NodeId p = first_element(*doc, "p");
    CHECK(text_segments(*doc, div) == std::vector<RankedText>{{"start", 1}, {"end", 2}});
    CHECK(text_segments(*doc, p) == std::vector<RankedText>{{"example", 1}});
}

TEST_CASE("element without text has no segments") {
    auto doc = parse_document("<ul>\n  <li><b>x</b></li>\n</ul>");
    CHECK(text_segments(*doc, first_element(*doc, "ul")).empty());
    CHECK(text_segments(*doc, first_element(*doc, "li")).empty());
}

TEST_CASE("planted interleaved texts get ranks 1..k") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        int k = 1 + trial % 7;
        auto [html, planted] = testing::interleaved_texts(rng, k);
        auto doc = parse_document(html);
        auto segs = text_segments(*doc, first_element(*doc, "div"));
        REQUIRE(segs.size() == planted.size());
        for (std::size_t i = 0; i < segs.size(); ++i) {
            CHECK(segs[i].rank == static_cast<int>(i) + 1);
            CHECK(segs[i].content == planted[i]);
        }
    }
}

TEST_CASE("serialize/reparse round-trip over generated documents") {
    std::mt19937 rng(2024);
    for (int i = 0; i < 100; ++i) {
        std::string html = testing::random_document(rng);
        auto doc = parse_document(html);
        std::string out = serialize(*doc);
        auto again = parse_document(out);
        INFO(html);
        REQUIRE(structurally_equal(*doc, doc->root(), *again, again->root()));
    }
}

TEST_CASE("parsing is deterministic") {
    std::mt19937 rng(5);
    std::string html = testing::random_document(rng);
    auto a = parse_document(html);
    auto b = parse_document(html);
    CHECK(structurally_equal(*a, a->root(), *b, b->root()));
}

TEST_CASE("last duplicate attribute wins") {
    auto doc = parse_document("<a href='one' class=x HREF=\"two\">t</a>");
    const Node& a = (*doc)[first_element(*doc, "a")];
    REQUIRE(a.attributes.size() == 2);
    CHECK(*a.attr("href") == "two");
    CHECK(a.attributes[0].name == "href");
}

TEST_CASE("malformed markup is repaired") {
    SUBCASE("implied list item ends") {
        auto doc = parse_document("<ul><li>a<li>b<li>c</ul><p>after");
        NodeId ul = first_element(*doc, "ul");
        CHECK(doc->element_children(ul).size() == 3);
        NodeId p = first_element(*doc, "p");
        CHECK((*doc)[(*doc)[p].parent].is_root());
    }
    SUBCASE("implied cells and rows") {
        auto doc = parse_document("<table><tr><td>1<td>2<tr><th>3<td>4</table>");
        NodeId table = first_element(*doc, "table");
        auto rows = doc->element_children(table);
        REQUIRE(rows.size() == 2);
        CHECK(doc->element_children(rows[0]).size() == 2);
        CHECK(doc->element_children(rows[1]).size() == 2);
    }
    SUBCASE("stray end tags are ignored") {
        auto doc = parse_document("<div></span>text</b></div>");
        auto segs = text_segments(*doc, first_element(*doc, "div"));
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].content == "text");
    }
    SUBCASE("unclosed elements close at end of input") {
        auto doc = parse_document("<div><span>open");
        CHECK(first_element(*doc, "span") != kNoNode);
    }
    SUBCASE("a lone angle bracket is text") {
        auto doc = parse_document("<p>1 < 2</p>");
        CHECK(text_segments(*doc, first_element(*doc, "p"))[0].content == "1 < 2");
    }
    SUBCASE("raw text elements keep markup-looking content") {
        auto doc = parse_document("<script>if (a<b) { x = '</div>'; }</script><div>ok</div>");
        NodeId script = first_element(*doc, "script");
        CHECK((*doc)[(*doc)[script].children[0]].text == "if (a<b) { x = '</div>'; }");
    }
    SUBCASE("paragraphs keep headings as written") {
        auto doc = parse_document("<p><h3>t</h3></p>");
        NodeId h3 = first_element(*doc, "h3");
        CHECK((*doc)[(*doc)[h3].parent].tag == "p");
    }
}

TEST_CASE("entities decode in text and attributes") {
    auto doc = parse_document("<p title='a &amp; b'>x &lt; y &#65;&#x42; &copy; &bogus; &amp</p>");
    const Node& p = (*doc)[first_element(*doc, "p")];
    CHECK(*p.attr("title") == "a & b");
    CHECK(text_segments(*doc, first_element(*doc, "p"))[0].content == "x < y AB \xC2\xA9 &bogus; &");
}

TEST_CASE("encodings") {
    CHECK_THROWS_AS(parse_document("<p>\xff\xfe</p>"), DecodeError);
    CHECK_THROWS_AS(parse_document("<p>\xe4\xb8</p>"), DecodeError);
    ParseOptions latin;
    latin.encoding = encoding_from_label("ISO-8859-1");
    auto doc = parse_document("<p>caf\xe9</p>", latin);
    CHECK(text_segments(*doc, first_element(*doc, "p"))[0].content == "caf\xc3\xa9");
    ParseOptions ascii;
    ascii.encoding = Encoding::Ascii;
    CHECK_THROWS_AS(parse_document("<p>caf\xe9</p>", ascii), DecodeError);
    CHECK_THROWS_AS(encoding_from_label("ebcdic"), DecodeError);
}

TEST_CASE("iframes load through the frame loader") {
    ParseOptions opts;
    opts.url = "http://site/a/index.html";
    int calls = 0;
    opts.frame_loader = [&](const std::string& parent, const std::string& src) -> std::optional<LoadedFrame> {
        ++calls;
        CHECK(parent == "http://site/a/index.html");
        if (src == "inner.html") return LoadedFrame{"<html><body><form><input name=q></form></body></html>", "http://site/a/inner.html"};
        return std::nullopt;
    };
    auto doc = parse_document("<div><iframe src='inner.html'></iframe><iframe src='missing.html'></iframe><iframe></iframe></div>", opts);
    CHECK(calls == 2);
    std::vector<NodeId> frames;
    for (NodeId id : doc->preorder(doc->root())) {
        if ((*doc)[id].is_element() && (*doc)[id].tag == "iframe") frames.push_back(id);
    }
    REQUIRE(frames.size() == 3);
    const Node& loaded = (*doc)[frames[0]];
    REQUIRE(loaded.children.size() == 1);
    CHECK((*doc)[loaded.children[0]].is_root());
    CHECK((*doc)[loaded.children[0]].url == "http://site/a/inner.html");
    CHECK((*doc)[frames[1]].children.empty());
    NodeId input = first_element(*doc, "input");
    CHECK((*doc)[input].frame_depth == 1);
    CHECK(doc->base_url(input) == "http://site/a/inner.html");
}

TEST_CASE("base element changes the document base url") {
    ParseOptions opts;
    opts.url = "http://site/a/index.html";
    auto doc = parse_document("<head><base href='/static/'></head><img src=x.png>", opts);
    CHECK(doc->base_url(doc->root()) == "http://site/static/");
}

TEST_CASE("inner_text collapses descendant text") {
    auto doc = parse_document("<a> Next\n <span>page</span> <script>x</script></a>");
    CHECK(inner_text(*doc, first_element(*doc, "a")) == "Next page");
}
