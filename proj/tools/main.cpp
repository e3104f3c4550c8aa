#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string_view>

#include "commands.hpp"
#include "rebalance/error.hpp"

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_logger_st("rebalance");
    logger->set_pattern("%l: %v");
    spdlog::set_default_logger(logger);

    const char* env = std::getenv("REBALANCE_LOG");
    const std::string_view level = env ? env : "info";
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::set_level(spdlog::level::info);
}

int fail(std::string_view category, std::string_view message, int code) {
    std::cerr << "error:" << category << ": " << message << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace rebalance;
    using namespace rebalance::cli;
    setup_logging();

    CLI::App app{"Rebalance imbalanced embedding datasets and evaluate downstream classifiers"};
    app.name("rebalance");
    Handler selected;
    try {
        register_commands(app, selected);
        app.parse(argc, argv);
        return selected ? selected() : kOk;
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kInput);
    } catch (const IoError& e) {
        return fail("io", e.what(), kInput);
    } catch (const FormatError& e) {
        return fail("format", e.what(), kInput);
    } catch (const PreconditionError& e) {
        return fail("method", e.what(), kMethod);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kInternal);
    }
}
