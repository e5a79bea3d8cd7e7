#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

/// Runs the executable with `args` inside `dir`; stdout and stderr are captured.
inline CliResult run_cli(const std::filesystem::path& exe, const std::filesystem::path& dir,
                         const std::vector<std::string>& args) {
    std::string cmd = "cd " + shell_quote(dir.string()) + " && " + shell_quote(exe.string());
    for (const auto& a : args) cmd += " " + shell_quote(a);
    const auto out = dir / ".stdout";
    const auto err = dir / ".stderr";
    cmd += " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    std::filesystem::remove(out);
    std::filesystem::remove(err);
    return r;
}

/// Every regular file under `root`, keyed by relative path, compared by content.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string* diff = nullptr) {
    namespace fs = std::filesystem;
    auto list = [](const fs::path& root) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
        }
        std::sort(files.begin(), files.end());
        return files;
    };
    const auto fa = list(a);
    const auto fb = list(b);
    if (fa != fb) {
        if (diff) *diff = "file sets differ";
        return false;
    }
    for (const auto& f : fa) {
        if (slurp(a / f) != slurp(b / f)) {
            if (diff) *diff = f.string();
            return false;
        }
    }
    return true;
}

}  // namespace testing
