#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "gazelab/error.hpp"
#include "gazelab/ingest.hpp"
#include "gazelab/raster.hpp"

using namespace gazelab;

namespace {

GazeRecording parse_gaze(const std::string& text) {
    std::istringstream in(text);
    return parse_gaze_log(in, "S1", 1);
}

const std::string kHeader = "t_ms,lx,ly,lvalid,rx,ry,rvalid\n";

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("gaze log with only a header has no samples") {
        const auto rec = parse_gaze(kHeader);
        CHECK(rec.samples.empty());
        CHECK(rec.subject_id == "S1");
    }

    TEST_CASE("both eyes valid gives the binocular midpoint") {
        const auto rec = parse_gaze(kHeader + "0,100,200,1,110,220,1\n");
        REQUIRE(rec.samples.size() == 1);
        CHECK(rec.samples[0].valid);
        CHECK(rec.samples[0].x == 105.0);
        CHECK(rec.samples[0].y == 210.0);
    }

    TEST_CASE("single valid eye is used as is") {
        auto rec = parse_gaze(kHeader + "0,0,0,0,300,400,1\n");
        REQUIRE(rec.samples.size() == 1);
        CHECK(rec.samples[0].valid);
        CHECK(rec.samples[0].x == 300.0);
        CHECK(rec.samples[0].y == 400.0);
        rec = parse_gaze(kHeader + "0,12,13,1,0,0,0\n");
        CHECK(rec.samples[0].x == 12.0);
        CHECK(rec.samples[0].y == 13.0);
    }

    TEST_CASE("no valid eye gives an invalid sample") {
        const auto rec = parse_gaze(kHeader + "5,1,2,0,3,4,0\n");
        REQUIRE(rec.samples.size() == 1);
        CHECK_FALSE(rec.samples[0].valid);
        CHECK(rec.samples[0].timestamp_ms == 5);
    }

    TEST_CASE("gaze row errors carry the line number") {
        const auto line_of = [](const std::string& text) -> std::size_t {
            try {
                parse_gaze(text);
            } catch (const ParseError& e) {
                return e.line();
            }
            return 0;
        };
        CHECK(line_of(kHeader + "10,1,1,1,1,1,1\n5,1,1,1,1,1,1\n") == 3);
        CHECK(line_of(kHeader + "10,1,1,1,1,1,1\n10,1,1,1,1,1,1\n") == 3);
        CHECK(line_of(kHeader + "0,1,1,2,1,1,1\n") == 2);
        CHECK(line_of(kHeader + "-1,1,1,1,1,1,1\n") == 2);
        CHECK(line_of(kHeader + "0,1,1,1,1,1\n") == 2);
        CHECK(line_of(kHeader + "0,abc,1,1,1,1,1\n") == 2);
        CHECK(line_of("time,x,y\n") == 1);
        CHECK(line_of("") == 1);
    }

    TEST_CASE("extra columns are carried and round-trip") {
        const auto rec = parse_gaze("t_ms,lx,ly,lvalid,rx,ry,rvalid,pupil\n0,1,2,1,1,2,1,3.5\n40,0,0,0,0,0,0,nan\n");
        REQUIRE(rec.extra_columns == std::vector<std::string>{"pupil"});
        REQUIRE(rec.extras.size() == 2);
        CHECK(rec.extras[1][0] == "nan");
        std::ostringstream out;
        write_gaze_log(out, rec);
        CHECK(parse_gaze(out.str()) == rec);
    }

    TEST_CASE("gaze log writer round-trips fractional coordinates") {
        GazeRecording rec;
        rec.subject_id = "S1";
        rec.samples = {{0, 0.1, 1.0 / 3.0, true}, {33, 0, 0, false}, {66, 1e-7, 1919.999, true}};
        std::ostringstream out;
        write_gaze_log(out, rec);
        CHECK(parse_gaze(out.str()) == rec);
    }

    TEST_CASE("segments parse and reject overlaps") {
        std::istringstream ok("case_id,start_ms,end_ms\na,0,100\nb,100,250\n");
        const auto segs = parse_segments(ok);
        REQUIRE(segs.size() == 2);
        CHECK(segs[1] == Segment{"b", 100, 250});
        std::istringstream overlap("case_id,start_ms,end_ms\na,0,100\nb,50,250\n");
        CHECK_THROWS_AS(parse_segments(overlap), ParseError);
        std::istringstream empty_span("case_id,start_ms,end_ms\na,100,100\n");
        CHECK_THROWS_AS(parse_segments(empty_span), ParseError);
    }

    TEST_CASE("manifest with 18 nodule, 9 normal and 6 distractor cases keeps its class counts") {
        std::vector<CaseDefinition> cases;
        for (int i = 0; i < 18; ++i) cases.push_back(fixtures::make_case("n" + std::to_string(i), CaseClass::nodule));
        for (int i = 0; i < 9; ++i) cases.push_back(fixtures::make_case("z" + std::to_string(i), CaseClass::normal));
        for (int i = 0; i < 6; ++i) {
            auto c = fixtures::make_case("d" + std::to_string(i), CaseClass::distractor);
            c.finding = "cardiomegaly";
            cases.push_back(c);
        }
        std::istringstream in(write_case_manifest(cases));
        const auto parsed = parse_case_manifest(in, [](const std::string&) { return Bitmap(64, 64, true); });
        REQUIRE(parsed.size() == 33);
        int counts[3] = {0, 0, 0};
        for (const auto& c : parsed) ++counts[static_cast<int>(c.case_class)];
        CHECK(counts[0] == 18);
        CHECK(counts[1] == 9);
        CHECK(counts[2] == 6);
        CHECK(parsed[0].nodule == cases[0].nodule);
        CHECK(parsed[0].subtlety == 3);
        CHECK(parsed[27].finding == "cardiomegaly");
    }

    TEST_CASE("manifest invariants") {
        const auto full = [](const std::string&) { return Bitmap(8, 8, true); };
        std::istringstream empty("[]");
        CHECK(parse_case_manifest(empty, full).empty());

        std::istringstream normal_with_disc(
            R"([{"case_id":"a","class":"normal","width":8,"height":8,"mask_path":"m","nodule":{"cx":1,"cy":1,"r":1}}])");
        CHECK_THROWS_AS(parse_case_manifest(normal_with_disc, full), ValidationError);

        std::istringstream nodule_without_disc(R"([{"case_id":"a","class":"nodule","width":8,"height":8,"mask_path":"m"}])");
        CHECK_THROWS_AS(parse_case_manifest(nodule_without_disc, full), ValidationError);

        std::istringstream dup(R"([{"case_id":"a","class":"normal","width":8,"height":8,"mask_path":"m"},
                                   {"case_id":"a","class":"normal","width":8,"height":8,"mask_path":"m"}])");
        CHECK_THROWS_AS(parse_case_manifest(dup, full), ValidationError);

        std::istringstream wrong_size(R"([{"case_id":"a","class":"normal","width":9,"height":8,"mask_path":"m"}])");
        CHECK_THROWS_AS(parse_case_manifest(wrong_size, full), ValidationError);

        std::istringstream ok(R"([{"case_id":"a","class":"normal","width":8,"height":8,"mask_path":"m"}])");
        CHECK_THROWS_AS(parse_case_manifest(ok, [](const std::string&) { return Bitmap(8, 8, false); }), ValidationError);
    }

    TEST_CASE("mask decoding") {
        const auto zero = parse_mask(std::string_view(fixtures::pgm(4, 4, std::vector<std::uint8_t>(16, 0))));
        CHECK(zero.width() == 4);
        CHECK(zero.count() == 0);

        std::vector<std::uint8_t> px(16, 0);
        px[5] = 255;
        const auto one = parse_mask(std::string_view(fixtures::pgm(4, 4, px)));
        CHECK(one.count() == 1);
        CHECK(one.at(1, 1));

        const std::string wide = fixtures::pgm(2, 1, {0, 0, 0, 0}, 65535);
        CHECK_THROWS_WITH_AS(parse_mask(std::string_view(wide)), doctest::Contains("unsupported depth"), ValidationError);
        CHECK_THROWS_AS(parse_mask(std::string_view("GIF89a")), ValidationError);
        CHECK_THROWS_AS(parse_mask(std::string_view(fixtures::pgm(4, 4, {1, 2, 3}))), ValidationError);
    }

    TEST_CASE("PNG masks decode like PGM masks") {
        raster::GrayImage img{3, 2, {0, 255, 0, 7, 0, 0}};
        const auto m = parse_mask(std::string_view(raster::encode_png(img)));
        CHECK(m.count() == 2);
        CHECK(m.at(1, 0));
        CHECK(m.at(0, 1));
        CHECK(parse_mask(std::string_view(write_mask(m))) == m);
    }

    TEST_CASE("annotations") {
        const std::map<std::string, CaseBounds> bounds{{"a", {100, 100}}, {"b", {50, 50}}};
        std::istringstream none("case_id,x,y,mark_timestamp_ms\n");
        CHECK(parse_annotations(none, bounds).empty());
        std::istringstream blank("");
        CHECK(parse_annotations(blank, bounds).empty());

        std::istringstream two("case_id,x,y,mark_timestamp_ms\na,1,2,100\na,3,4,200\n");
        const auto set = parse_annotations(two, bounds);
        REQUIRE(set.at("a").size() == 2);
        CHECK(set.at("a")[1] == Mark{{3, 4}, 200});

        std::istringstream oob("case_id,x,y,mark_timestamp_ms\na,-5,10,0\n");
        CHECK_THROWS_AS(parse_annotations(oob, bounds), ParseError);
        std::istringstream edge("case_id,x,y,mark_timestamp_ms\nb,50,10,0\n");
        CHECK_THROWS_AS(parse_annotations(edge, bounds), ParseError);
        std::istringstream unknown("case_id,x,y,mark_timestamp_ms\nq,1,1,0\n");
        CHECK_THROWS_AS(parse_annotations(unknown, bounds), ParseError);

        std::ostringstream out;
        write_annotations(out, set);
        std::istringstream back(out.str());
        CHECK(parse_annotations(back, bounds) == set);
    }

    TEST_CASE("format_double round-trips") {
        for (double v : {0.0, 0.1, 1.0 / 3.0, 54.41, 1e-300, -2.5e17}) CHECK(std::stod(format_double(v)) == v);
    }
}
