#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <nsdyn/cli.hpp>

namespace {

int fail_usage(const std::string& message)
{
    std::cerr << nsdyn::json{{"error", "ConfigError"}, {"message", message}, {"exit_code", 1}}.dump() << "\n";
    return nsdyn::exit_usage;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Empirical measures, periodic orbits and parabolic parameters of rational maps"};
    std::string subcommand, config_path, output_path, csv_path, format = "csv";
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    app.add_option("subcommand", subcommand, "one of: orbit empirical law periodic close transit pcf rank parabolic "
                                             "scenario probe");
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("-w,--workers", workers, "worker threads (default: NSDYN_WORKERS, else 1)");
    app.add_option("-o,--output", output_path, "report path (default: stdout)");
    app.add_option("--csv", csv_path, "also write plot data to this path");
    app.add_option("--format", format, "plot data format (csv)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail_usage(std::string(e.what()) + "\n" + nsdyn::usage());
    }
    if (subcommand.empty())
        return fail_usage(nsdyn::usage());

    nsdyn::json config = nsdyn::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in)
            return fail_usage("cannot open config '" + config_path + "'");
        try {
            config = nsdyn::json::parse(in);
        } catch (const nsdyn::json::exception& e) {
            return fail_usage(std::string("config is not valid JSON: ") + e.what());
        }
    }
    if (seed)
        config["seed"] = *seed;
    if (output_path.empty() && config.is_object() && config.contains("output") && config["output"].is_string())
        output_path = config["output"].get<std::string>();

    const auto res = nsdyn::run(subcommand, config, {workers});
    if (!res.error.is_null())
        std::cerr << res.error.dump() << "\n";
    if (res.output.is_null())
        return res.exit_code;

    const std::string text = res.output.dump(2) + "\n";
    if (output_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(output_path, std::ios::binary);
        out << text;
    }
    if (!csv_path.empty()) {
        try {
            const auto csv = nsdyn::emit_plot_data(subcommand, res.output, format);
            std::ofstream out(csv_path, std::ios::binary);
            out << csv;
        } catch (const nsdyn::Error& e) {
            std::cerr << nsdyn::json{{"error", std::string(nsdyn::to_string(e.code()))}, {"message", e.what()},
                                     {"exit_code", 1}}
                             .dump()
                      << "\n";
            return nsdyn::exit_usage;
        }
    }
    return res.exit_code;
}
