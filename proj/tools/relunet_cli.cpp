#include "relunet/experiment.hpp"
#include "relunet/repr.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace relunet;

namespace {

struct Args {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    int jobs = 1;
    bool corrupt_gradient = false;
};

int fail(int code, const std::string& message) {
    std::cerr << "error: " << message << '\n';
    return code;
}

int execute(const std::string& command, const Args& args) {
    Json config;
    {
        std::ifstream in(args.config_path);
        if (!in) return fail(kExitParse, "cannot open config '" + args.config_path + "'");
        try {
            config = Json::parse(in);
        } catch (const Json::exception& e) {
            return fail(kExitParse, std::string("malformed config: ") + e.what());
        }
    }
    RunOptions opts;
    opts.seed = args.seed;
    opts.mode = args.mode;
    opts.jobs = args.jobs;
    opts.corrupt_gradient = args.corrupt_gradient;

    CommandResult result;
    try {
        result = run_command(command, config, opts);
    } catch (const InvalidInput& e) {
        return fail(kExitParse, e.what());
    } catch (const Json::exception& e) {
        return fail(kExitParse, std::string("malformed config: ") + e.what());
    } catch (const std::exception& e) {
        return fail(1, e.what());
    }

    std::cout << json_text(result.report);
    if (!args.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(args.out_dir, ec);
        if (ec) return fail(1, "cannot create output directory: " + ec.message());
        for (const auto& [name, content] : result.files) {
            std::ofstream out(fs::path(args.out_dir) / name, std::ios::binary);
            out << content;
            if (!out) return fail(1, "cannot write " + name);
        }
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact risk, representability and training dynamics for ReLU networks"};
    app.require_subcommand(1);
    Args args;
    std::string chosen;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed, "master seed, overrides the config");
        sub->add_option("--mode", args.mode, "rational or float, overrides the config")
            ->check(CLI::IsMember({"rational", "float"}));
        sub->add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
        if (name == "gradcheck") sub->add_flag("--corrupt-gradient", args.corrupt_gradient)->group("");
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }
    return execute(chosen, args);
}
