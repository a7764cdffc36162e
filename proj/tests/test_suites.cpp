#include <nodeflow/nodeflow.hpp>

#include <catch_amalgamated.hpp>

#include <charconv>
#include <random>

using namespace nodeflow;

namespace {

std::string config_error_field(const std::string& text)
{
    try {
        parse_config_text(text);
    } catch (const ConfigInvalid& e) {
        return e.field();
    }
    return "<no error>";
}

Json light(SuiteKind kind)
{
    switch (kind) {
    case SuiteKind::flow_axioms:
        return Json::parse(R"({"kind":"flow_axioms","dimension":2,"params":{"cases":8,"closed_form_grid":3}})");
    case SuiteKind::gronwall:
        return Json::parse(R"({"kind":"gronwall","dimension":1,"params":{"resolution":5,"perturbations":[0.1]},
                              "train":{"epoch_count":2,"sample_count":32,"batch_size":16}})");
    case SuiteKind::fit:
        return Json::parse(R"({"kind":"fit","dimension":1,"params":{"target":{"type":"zero","dim":1},
                              "refinement_levels":2},"train":{"epoch_count":3,"sample_count":64,"resolution":5}})");
    case SuiteKind::rescale:
        return Json::parse(R"({"kind":"rescale","dimension":3,"params":{"points":2,"times":[-0.5,2.0]}})");
    default:
        return {};
    }
}

} // namespace

TEST_CASE("config validation names the offending field", "[suites]")
{
    CHECK(config_error_field(R"({"dimension":2})") == "kind");
    CHECK(config_error_field(R"({"kind":"flow_axioms"})") == "dimension");
    CHECK(config_error_field(R"({"kind":"spiral","dimension":2})") == "kind");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":0})") == "dimension");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":7})") == "dimension");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":2.5})") == "dimension");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":2,"sede":3})") == "sede");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":2,"seed":-3})") == "seed");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":2,"box":{"lower":[0],"upper":[1]}})") == "box");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":1,"box":{"lower":[1],"upper":[0]}})") == "box");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":1,"solver":{"step_count":0}})") == "solver");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":1,"solver":{"step_count":"many"}})") ==
          "solver.step_count");
    CHECK(config_error_field(R"({"kind":"fit","dimension":1})") == "params.target");
    CHECK(config_error_field(R"({"kind":"compose","dimension":3})") == "params.stages");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":1,"params":[]})") == "params");
    CHECK(config_error_field(R"({"kind":"flow_axioms","dimension":1,"output_prefix":""})") == "output_prefix");
    CHECK(config_error_field("{\"kind\":") == "<root>");
    CHECK(config_error_field(R"({"kind":"rescale","dimension":2})") == "<no error>");
}

TEST_CASE("config defaults", "[suites]")
{
    const ExperimentConfig c = parse_config_text(R"({"kind":"gronwall","dimension":3,"seed":11})");
    CHECK(c.kind == SuiteKind::gronwall);
    CHECK(c.box == Box::cube(3, -1.5, 1.5));
    CHECK(c.seed == 11);
    CHECK(c.train.seed == 11);
    CHECK(c.output_prefix == "gronwall");
    CHECK(c.solver.step_count == SolverConfig{}.step_count);

    const ExperimentConfig compose = parse_config_text(R"({"kind":"compose","dimension":2})");
    CHECK(compose.train.epoch_count == demo_train_config().epoch_count);
    CHECK(compose.train.seed == 7);
}

TEST_CASE("suite parameters are validated when the suite runs", "[suites]")
{
    const auto run_error = [](const std::string& text) {
        try {
            run_suite(parse_config_text(text));
        } catch (const ConfigInvalid& e) {
            return e.field();
        }
        return std::string("<no error>");
    };
    CHECK(run_error(R"({"kind":"rescale","dimension":1,"params":{"points":0}})") == "params.points");
    CHECK(run_error(R"({"kind":"rescale","dimension":1,"params":{"times":"all"}})") == "params.times");
    CHECK(run_error(R"({"kind":"fit","dimension":1,"params":{"target":{"type":"spiral"}}})") ==
          "params.target.type");
    CHECK(run_error(R"({"kind":"fit","dimension":2,"params":{"target":{"type":"zero","dim":1}}})") ==
          "params.target");
}

TEST_CASE("suite names", "[suites]")
{
    CHECK(kSuiteNames.size() == 6);
    CHECK(suite_name(SuiteKind::normcmp) == "normcmp");
    CHECK(suite_name(SuiteKind::flow_axioms) == "flow_axioms");
}

TEST_CASE("light suites are deterministic and thread-count independent", "[suites][property]")
{
    for (const auto kind : {SuiteKind::flow_axioms, SuiteKind::gronwall, SuiteKind::fit, SuiteKind::rescale}) {
        const ExperimentConfig c = parse_config(light(kind));
        const SuiteResult a = run_suite(c, 1);
        const SuiteResult b = run_suite(c, 1);
        const SuiteResult t = run_suite(c, 3);
        INFO(suite_name(kind));
        CHECK(a.csv == b.csv);
        CHECK(a.csv == t.csv);
        CHECK(a.results == t.results);
        CHECK(a.svg == t.svg);
        CHECK(a.passed);
        CHECK(a.failures.empty());
        CHECK(a.csv.find("seed") != std::string::npos);
    }
}

TEST_CASE("report documents carry the config and the verdict", "[suites]")
{
    const ExperimentConfig c = parse_config(light(SuiteKind::rescale));
    const SuiteResult r = run_suite(c);
    const Json meta = {{"tool", "test"}};
    const Json j = report_json(c, r, meta);
    CHECK(j.at("suite") == "rescale");
    CHECK(j.at("config") == c.source);
    CHECK(j.at("passed") == r.passed);
    CHECK(j.at("metadata") == meta);
    CHECK(j.at("seed") == 7);
}

TEST_CASE("doubles are written in shortest round-trip form", "[report]")
{
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = i % 3 == 0 ? u(rng) : std::ldexp(u(rng), static_cast<int>(i % 400) - 200);
        const std::string s = format_double(v);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(back == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(NAN) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv tables quote only when needed", "[report]")
{
    CsvTable t({"name", "n", "x", "ok"});
    t.add_row({std::string("a,b"), 3L, 0.5, true});
    t.add_row({std::string("say \"hi\""), -1L, 1e-300, false});
    CHECK(t.str() == "name,n,x,ok\n\"a,b\",3,0.5,true\n\"say \"\"hi\"\"\",-1,1e-300,false\n");
    CHECK_THROWS_AS(t.add_row({1L}), InvalidArgument);
}

TEST_CASE("charts render as standalone svg", "[report]")
{
    ChartSpec chart{"norms & gaps", "delta", "value", true, true, {{"p=1", {1e-2, 1e-4}, {1.0, 1.5}}, {"bad", {-1.0}, {0.0}}}};
    const std::string svg = render_svg(chart);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("norms &amp; gaps") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(render_svg(chart) == svg);
}
