#include "flowcanvas/sandbox.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace flowcanvas {

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "fc-sandbox-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (mkdtemp(buf.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string rstrip(const std::string& s) {
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return end == std::string::npos ? "" : s.substr(0, end + 1);
}

// Tracebacks embed the throwaway working directory; replace it so captured
// output is stable across runs.
std::string scrub_paths(std::string text, const std::string& dir) {
    std::size_t pos = 0;
    while ((pos = text.find(dir, pos)) != std::string::npos) {
        text.replace(pos, dir.size(), "<sandbox>");
        pos += 9;
    }
    return text;
}

}  // namespace

SandboxResult sandbox_execute(const std::string& code, const std::string& stdin_text,
                              const SandboxConfig& config) {
    SandboxResult result;
    if (code.empty()) {
        result.status = SandboxStatus::Denied;
        result.stderr_text = "empty code";
        return result;
    }

    TempDir dir;
    fs::path script = dir.path / "main.py";
    fs::path in_path = dir.path / "in.txt";
    fs::path out_path = dir.path / "out.txt";
    fs::path err_path = dir.path / "err.txt";
    write_file(script, code);
    write_file(in_path, stdin_text);
    write_file(out_path, "");
    write_file(err_path, "");

    // Status pipe: the child reports isolation state ('1'/'0'), a strict
    // isolation denial ('D') or an exec failure ('X') before exec; the write
    // end is O_CLOEXEC so a successful exec shows up as EOF.
    int status_pipe[2];
    if (pipe2(status_pipe, O_CLOEXEC) != 0) {
        result.status = SandboxStatus::Denied;
        result.stderr_text = "pipe2 failed";
        return result;
    }

    auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) {
        close(status_pipe[0]);
        close(status_pipe[1]);
        result.status = SandboxStatus::Denied;
        result.stderr_text = "fork failed";
        return result;
    }

    if (pid == 0) {
        close(status_pipe[0]);
        setpgid(0, 0);
        char isolation = '1';
        if (unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) {
            if (!config.best_effort_isolation) {
                char d = 'D';
                ssize_t ignored = write(status_pipe[1], &d, 1);
                (void)ignored;
                _exit(127);
            }
            isolation = '0';
        }
        ssize_t ignored = write(status_pipe[1], &isolation, 1);
        (void)ignored;

        if (chdir(dir.path.c_str()) != 0) _exit(126);
        int in_fd = open(in_path.c_str(), O_RDONLY);
        int out_fd = open(out_path.c_str(), O_WRONLY | O_TRUNC);
        int err_fd = open(err_path.c_str(), O_WRONLY | O_TRUNC);
        if (in_fd < 0 || out_fd < 0 || err_fd < 0) _exit(126);
        dup2(in_fd, STDIN_FILENO);
        dup2(out_fd, STDOUT_FILENO);
        dup2(err_fd, STDERR_FILENO);

        execlp(config.interpreter.c_str(), config.interpreter.c_str(), "-I", "main.py",
               static_cast<char*>(nullptr));
        char x = 'X';
        ignored = write(status_pipe[1], &x, 1);
        (void)ignored;
        _exit(127);
    }

    close(status_pipe[1]);
    setpgid(pid, pid);

    bool timed_out = false;
    int wait_status = 0;
    for (;;) {
        pid_t done = waitpid(pid, &wait_status, WNOHANG);
        if (done == pid) break;
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        if (elapsed >= config.limit) {
            timed_out = true;
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &wait_status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    result.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    char marks[4] = {0, 0, 0, 0};
    ssize_t got = read(status_pipe[0], marks, sizeof(marks));
    close(status_pipe[0]);

    result.stdout_text = scrub_paths(read_file(out_path), dir.path.string());
    result.stderr_text = scrub_paths(read_file(err_path), dir.path.string());

    for (ssize_t i = 0; i < got; ++i) {
        if (marks[i] == 'D') {
            result.status = SandboxStatus::Denied;
            result.stderr_text = "sandbox isolation unavailable on this platform";
            return result;
        }
        if (marks[i] == 'X') {
            result.status = SandboxStatus::Denied;
            result.stderr_text = "interpreter not found: " + config.interpreter;
            return result;
        }
        if (marks[i] == '1') result.network_isolated = true;
    }

    if (timed_out) {
        result.status = SandboxStatus::Timeout;
    } else if (WIFEXITED(wait_status) && WEXITSTATUS(wait_status) == 0) {
        result.status = SandboxStatus::Ok;
    } else {
        result.status = SandboxStatus::NonZero;
    }
    return result;
}

TestOutcome run_test_suite(const std::string& code, const std::vector<TestCase>& tests,
                           const SandboxConfig& config) {
    TestOutcome outcome;
    outcome.total = static_cast<int>(tests.size());
    for (std::size_t i = 0; i < tests.size(); ++i) {
        auto res = sandbox_execute(code, tests[i].stdin_text, config);
        bool ok = res.status == SandboxStatus::Ok &&
                  rstrip(res.stdout_text) == rstrip(tests[i].expected_stdout);
        if (ok) {
            outcome.passed++;
        } else if (outcome.first_failure.empty()) {
            std::ostringstream ss;
            ss << "test " << (i + 1) << ": stdin " << nlohmann::json(tests[i].stdin_text)
               << ", expected " << nlohmann::json(rstrip(tests[i].expected_stdout)) << ", got ";
            if (res.status == SandboxStatus::Timeout) {
                ss << "timeout";
            } else if (res.status == SandboxStatus::Denied) {
                ss << "denied (" << rstrip(res.stderr_text) << ")";
            } else if (res.status == SandboxStatus::NonZero) {
                std::string err = rstrip(res.stderr_text);
                if (err.size() > 200) err = err.substr(err.size() - 200);
                ss << "error (" << err << ")";
            } else {
                ss << nlohmann::json(rstrip(res.stdout_text));
            }
            outcome.first_failure = ss.str();
        }
    }
    return outcome;
}

std::vector<TestCase> load_test_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open test suite: " + path);
    std::vector<TestCase> tests;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line);
        tests.push_back({j.at("stdin").get<std::string>(),
                         j.at("expected_stdout").get<std::string>()});
    }
    return tests;
}

}  // namespace flowcanvas
