// nodeflow: runs verification suites from JSON experiment configs.
//
// Exit codes: 0 all bounds held, 1 some bound failed, 2 usage or config
// error, 3 module error (no outputs written).

#include <nodeflow/nodeflow.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitBoundFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitModule = 3;

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes via a temporary name and renames, so readers never see a partial file.
void write_file(const fs::path& path, const std::string& content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

int run(const std::string& config_path, const std::string& out_dir, int threads)
{
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read config " << config_path << "\n";
        return kExitConfig;
    }
    std::stringstream text;
    text << in.rdbuf();

    nodeflow::ExperimentConfig cfg;
    nodeflow::SuiteResult result;
    try {
        cfg = nodeflow::parse_config_text(text.str());
        result = nodeflow::run_suite(cfg, threads);
    } catch (const nodeflow::ConfigInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\nconfig: " << cfg.source.dump() << "\n";
        return kExitModule;
    }

    const nodeflow::Json metadata = {{"generated_at", utc_timestamp()},
                                     {"threads", threads},
                                     {"config_path", config_path},
                                     {"tool", "nodeflow " NODEFLOW_VERSION}};
    const fs::path prefix = fs::path(out_dir) / cfg.output_prefix;
    try {
        fs::create_directories(prefix.parent_path());
        write_file(prefix.string() + ".report.json", nodeflow::report_json(cfg, result, metadata).dump(2) + "\n");
        write_file(prefix.string() + ".csv", result.csv);
        if (result.svg) {
            write_file(prefix.string() + ".svg", *result.svg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitModule;
    }

    std::cout << cfg.output_prefix << ": " << nodeflow::suite_name(cfg.kind) << " "
              << (result.passed ? "PASS" : "FAIL") << "\n";
    for (const auto& f : result.failures) {
        std::cout << "  failure: " << f.dump() << "\n";
    }
    return result.passed ? 0 : kExitBoundFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nodeflow: invertible neural-ODE verification suites"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    int threads = nodeflow::default_thread_count();
    auto* run_cmd = app.add_subcommand("run", "Run the suite named by a JSON experiment config");
    run_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
    run_cmd->add_option("--out-dir", out_dir, "Directory for <prefix>.report.json, .csv and .svg");
    run_cmd->add_option("--threads", threads, "Worker threads (default: NODEFLOW_THREADS or 1)")
        ->check(CLI::PositiveNumber);

    bool as_json = false;
    auto* list_cmd = app.add_subcommand("list", "List the available suites");
    list_cmd->add_flag("--json", as_json, "Print a JSON array");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    if (*list_cmd) {
        if (as_json) {
            nodeflow::Json names = nodeflow::Json::array();
            for (const auto n : nodeflow::kSuiteNames) {
                names.push_back(std::string(n));
            }
            std::cout << names.dump() << "\n";
        } else {
            for (const auto n : nodeflow::kSuiteNames) {
                std::cout << n << "\n";
            }
        }
        return 0;
    }
    return run(config_path, out_dir, threads);
}
