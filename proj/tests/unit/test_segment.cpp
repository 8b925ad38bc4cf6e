#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "support/generator.hpp"
#include "webwrap/error.hpp"
#include "webwrap/provider.hpp"
#include "webwrap/segment.hpp"

using namespace webwrap;
using namespace webwrap::segment;

namespace {

provider::FixtureProvider& fixtures() {
    static provider::FixtureProvider p(WEBWRAP_FIXTURES);
    return p;
}

std::vector<dom::NodeId> elements(const dom::Document& doc, const std::string& tag) {
    std::vector<dom::NodeId> out;
    for (auto id : doc.preorder(doc.root())) {
        if (doc[id].is_element() && doc[id].tag == tag) out.push_back(id);
    }
    return out;
}

dom::DocumentPtr parse_site(const testing::GeneratedSite& site) {
    dom::ParseOptions o;
    o.url = site.url;
    o.frame_loader = testing::frame_loader(site);
    return dom::parse_document(site.html, o);
}

}  // namespace

TEST_CASE("similarity examples") {
    auto doc = dom::parse_document(
        "<ul><li><img src=a><p>x</p></li><li><img src=b><p>other words</p></li></ul>"
        "<table><tr><th>A</th><th>B</th></tr><tr><td>1</td><td>2</td></tr></table>"
        "<ol><li><p>a</p></li><li><p>b</p><span>c</span></li></ol>");
    auto li = elements(*doc, "li");
    auto tr = elements(*doc, "tr");
    CHECK(similar(*doc, li[0], li[1]));
    CHECK(similar(*doc, tr[0], tr[1]));
    CHECK_FALSE(similar(*doc, li[2], li[3]));
    CHECK_FALSE(similar(*doc, li[0], tr[1]));
    CHECK(signature(*doc, li[0]) == Signature{"img", "p"});
    CHECK(signature(*doc, elements(*doc, "ul")[0]) == Signature{"li(img,p)", "li(img,p)"});
    CHECK(signature(*doc, tr[0]) == Signature{"td", "td"});
    SegmentOptions shallow{true};
    CHECK(signature(*doc, elements(*doc, "ul")[0], shallow) == Signature{"li", "li"});
}

TEST_CASE("signature ignores text and follows descendant tags") {
    auto a = dom::parse_document("<div><p>one <b>two</b></p><span>x</span></div>");
    auto b = dom::parse_document("<div><p>changed text <b>here</b> too</p><span></span></div>");
    auto c = dom::parse_document("<div><p>one <i>two</i></p><span>x</span></div>");
    auto sig = [](const dom::Document& d) { return signature(d, elements(d, "div")[0]); };
    CHECK(sig(*a) == sig(*b));
    CHECK(sig(*a) != sig(*c));
}

TEST_CASE("earthquake result page has three blocks") {
    auto doc = fixtures().load({"http://quake.example/history/query", provider::Method::Get,
                                SelectorPath::parse("form"),
                                {{"__token", "7f3a"}, {"start_time", "2019-01-03"}, {"end_time", "2019-01-19"},
                                 {"min_lat", ""}, {"max_lat", ""}, {"min_lon", ""}, {"max_lon", ""},
                                 {"min_depth", ""}, {"max_depth", ""}, {"min_mag", ""}, {"max_mag", ""}}});
    auto blocks = segment::segment(*doc);
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].sub_block_tag == "div");  // form rows
    CHECK(blocks[0].metrics.sub_block_count == 10);
    CHECK(blocks[1].sub_block_tag == "tr");
    CHECK(blocks[1].metrics.sub_block_count == 13);  // header row included
    CHECK(blocks[1].signature == Signature(6, "td"));
    CHECK(blocks[1].metrics.size_proxy == 13 * 6);
    CHECK(blocks[2].sub_block_tag == "a");
    CHECK(blocks[2].metrics.sub_block_count == 3);
    CHECK(blocks[2].metrics.size_proxy == 0);

    auto fields = block_fields(*doc, blocks[1]);
    REQUIRE(fields.size() == 12);
    for (const auto& row : fields) {
        REQUIRE(row.size() == 6);
        for (const auto& c : row) CHECK(c.kind == CarrierKind::Text);
    }
    CHECK(fields[0][0].value == "3.1");
    CHECK(fields[0][5].value == "Yunnan Lufeng");
    CHECK(fields[0][1].path.str() == "td:nth-child(2)");
    CHECK(locate_sub_blocks(*doc, blocks[1]).size() == 12);
}

TEST_CASE("no repeated structure") {
    auto doc = dom::parse_document("<html><body><div><p>a</p></div><section><span>b</span></section><h1>c</h1></body></html>");
    CHECK(segment::segment(*doc).empty());
}

TEST_CASE("identical single-text items give one field") {
    auto doc = dom::parse_document("<html><body><ul><li>a</li><li>b</li><li>c</li></ul></body></html>");
    auto blocks = segment::segment(*doc);
    REQUIRE(blocks.size() == 1);
    auto fields = block_fields(*doc, blocks[0]);
    REQUIRE(fields.size() == 3);
    for (const auto& f : fields) CHECK(f.size() == 1);
    CHECK(fields[2][0].value == "c");
    CHECK(fields[2][0].path.empty());
    CHECK(fields[2][0].rank == 1);
}

TEST_CASE("data-less runs are dropped and iframes are entered") {
    auto doc = dom::parse_document(
        "<html><head><meta a=1><meta b=2></head><body><br><br><hr><hr>"
        "<iframe srcdoc=\"<ul><li>x</li><li>y</li></ul>\"></iframe>"
        "<iframe srcdoc=\"<p>z</p>\"></iframe></body></html>");
    auto blocks = segment::segment(*doc);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].parent_selector.frame_marks() == 1);
}

TEST_CASE("alignment errors name the divergent sub-block") {
    auto doc = dom::parse_document(
        "<html><body><ul><li><span>a</span><a href=x>l</a></li><li><span>b</span><a>l</a></li></ul></body></html>");
    auto blocks = segment::segment(*doc);
    REQUIRE(blocks.size() == 1);
    try {
        block_fields(*doc, blocks[0]);
        FAIL("expected an alignment error");
    } catch (const AlignmentError& e) {
        CHECK(e.details().at(0) == "html>body>ul>li:nth-child(2)");
    }
}

TEST_CASE("carrier order and urls") {
    auto doc = dom::parse_document(
        "<div style=\"background-image:url('bg.png')\">lead<p>one<b>two</b>three</p>"
        "<img src=\"/i.png\"><a href=\"../d\" style=\"background: url(x.gif) no-repeat\"><img src=\"n.png\"><span>t</span></a>"
        "<script>ignored()</script></div>",
        {"http://h.test/a/b/page.html"});
    auto cs = carriers(*doc, elements(*doc, "div")[0]);
    std::vector<std::string> values;
    for (const auto& c : cs) values.push_back(c.value);
    CHECK(values == std::vector<std::string>{"lead", "one", "three", "two", "http://h.test/a/b/bg.png",
                                             "http://h.test/i.png", "http://h.test/a/d"});
    CHECK(cs[2].rank == 2);
    CHECK(cs[2].path.str() == "p");
    REQUIRE(cs[6].nested.size() == 3);
    CHECK(cs[6].nested[0].value == "t");
    CHECK(cs[6].nested[0].path.str() == "span:nth-child(2)");
    CHECK(cs[6].nested[1].value == "http://h.test/a/b/x.gif");
    CHECK(cs[6].nested[1].path.empty());
    CHECK(cs[6].nested[2].value == "http://h.test/a/b/n.png");
    CHECK(background_image("color:red; background-image: url( \"q.jpg\" )") == "q.jpg");
    CHECK(background_image("color:red").empty());
}

TEST_CASE("generated pages: planted lists recovered exactly") {
    std::mt19937 rng(20190103);
    int exact_pages = 0, framed_lists = 0, header_lists = 0;
    for (int page = 0; page < 100; ++page) {
        auto site = testing::generate_site(rng, page);
        auto doc = parse_site(site);
        auto blocks = segment::segment(*doc);

        std::set<std::pair<dom::NodeId, std::vector<dom::NodeId>>> found, planted;
        for (const auto& b : blocks) {
            std::vector<dom::NodeId> subs;
            for (const auto& s : b.sub_block_selectors) subs.push_back(resolve_selector(*doc, s));
            found.insert({resolve_selector(*doc, b.parent_selector), subs});
        }
        for (const auto& l : site.lists) {
            std::vector<dom::NodeId> subs;
            for (const auto& s : l.sub_block_selectors) subs.push_back(resolve_selector(*doc, SelectorPath::parse(s)));
            planted.insert({resolve_selector(*doc, SelectorPath::parse(l.parent_selector)), subs});
            framed_lists += l.in_iframe;
            header_lists += !l.header_texts.empty();
        }
        CHECK(found == planted);
        exact_pages += found == planted;

        // th/td normalization: the same page with every th rewritten segments identically
        std::string td_html = site.html;
        for (std::string::size_type p; (p = td_html.find("<th>")) != std::string::npos;) td_html.replace(p, 4, "<td>");
        for (std::string::size_type p; (p = td_html.find("</th>")) != std::string::npos;) td_html.replace(p, 5, "</td>");
        dom::ParseOptions o;
        o.url = site.url;
        o.frame_loader = testing::frame_loader(site);
        auto td_doc = dom::parse_document(td_html, o);
        auto td_blocks = segment::segment(*td_doc);
        REQUIRE(td_blocks.size() == blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            CHECK(td_blocks[i].parent_selector == blocks[i].parent_selector);
            CHECK(td_blocks[i].sub_block_selectors == blocks[i].sub_block_selectors);
        }
    }
    CHECK(exact_pages == 100);
    CHECK(framed_lists > 0);
    CHECK(header_lists > 0);
}

TEST_CASE("block invariants over generated pages") {
    std::mt19937 rng(77);
    for (int page = 0; page < 40; ++page) {
        testing::GenOptions opt;
        opt.nested_iframe = page % 4 == 0;
        auto site = testing::generate_site(rng, page, opt);
        auto doc = parse_site(site);
        auto blocks = segment::segment(*doc);
        std::vector<std::vector<dom::NodeId>> subs;
        for (const auto& b : blocks) {
            CHECK(b.sub_block_selectors.size() >= 2);
            CHECK(b.metrics.sub_block_count == static_cast<int>(b.sub_block_selectors.size()));
            std::vector<dom::NodeId> ids;
            dom::NodeId parent = resolve_selector(*doc, b.parent_selector);
            for (const auto& s : b.sub_block_selectors) {
                ids.push_back(resolve_selector(*doc, s));
                CHECK((*doc)[ids.back()].parent == parent);
                CHECK(signature(*doc, ids.back()) == b.signature);
            }
            subs.push_back(ids);
        }
        // no nesting: no parent lies inside another block's sub-block
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            dom::NodeId parent = resolve_selector(*doc, blocks[i].parent_selector);
            for (std::size_t j = 0; j < blocks.size(); ++j) {
                for (auto s : subs[j]) CHECK_FALSE(doc->is_within(parent, s));
            }
        }
        // determinism
        CHECK(segment::segment(*doc) == blocks);
    }
}

TEST_CASE("block json round trip") {
    auto doc = fixtures().load({"https://movie.douban.example/chart"});
    auto blocks = segment::segment(*doc);
    REQUIRE(blocks.size() == 5);
    for (const auto& b : blocks) CHECK(block_from_json(to_json(b)) == b);
    CHECK_THROWS_AS(block_from_json(Json::parse(R"({"parent_selector": 3})")), ValidationError);
}
