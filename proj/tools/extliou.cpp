#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "extliou/scenario.hpp"

namespace {

int run_command(const std::string& sub, const std::string& config_path, const std::string& out_flag,
                int jobs, const std::vector<std::string>& formats)
{
    using namespace extliou;
    std::ifstream is(config_path);
    if (!is) {
        std::cerr << "error: cannot read config '" << config_path << "'\n";
        return 4;
    }
    std::ostringstream text;
    text << is.rdbuf();
    try {
        json doc;
        try {
            doc = json::parse(text.str());
        } catch (const json::parse_error& e) {
            throw ConfigError("$", std::string("malformed JSON: ") + e.what());
        }
        ScenarioConfig cfg = parse_config(doc, sub);
        if (const char* env = std::getenv(kOutDirEnv); env && *env)
            cfg.out_dir = env;
        if (!out_flag.empty())
            cfg.out_dir = out_flag;
        if (!formats.empty())
            cfg.formats = formats;
        if (jobs < 1)
            throw ConfigError("--jobs", "must be >= 1");
        const auto res = run(cfg, cfg.out_dir, jobs);
        std::cout << res.summary.dump(1) << '\n';
        for (const auto& f : res.files)
            std::cerr << "wrote " << cfg.out_dir << '/' << f << '\n';
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << e.field << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Extended-Liouvillian exceptional-point analysis"};
    app.set_version_flag("--version", extliou::kVersion);
    app.require_subcommand(1);

    std::string config, out;
    int jobs = 1;
    std::vector<std::string> formats;
    for (const auto& name : extliou::known_actions()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config,-c", config, "scenario JSON file")->required();
        sub->add_option("--out,-o", out, "output directory (overrides config and environment)");
        sub->add_option("--jobs,-j", jobs, "worker threads for sweeps");
        sub->add_option("--format,-f", formats, "csv, json or svg (repeatable)")
            ->check(CLI::IsMember({"csv", "json", "svg"}))
            ->take_last()
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return run_command(app.get_subcommands().front()->get_name(), config, out, jobs, formats);
}
