#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run(const std::string& args) {
    std::string out_path = std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp") +
                           "/sdfap_cli_out.txt";
    std::string cmd = std::string("SDFAP_COLOR=0 ") + SDFAP_BIN + " " + args + " > " + out_path +
                      " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    return r;
}

std::string corpus(const std::string& name) { return std::string(SDFAP_CORPUS_DIR) + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
    std::string path =
        std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp") + "/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("check accepts a clean program") {
    RunResult r = run("check " + corpus("maps.sdf") + " --entry maps6844");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("ok:") != std::string::npos);
}

TEST_CASE("check rejects a pattern-sum mismatch with a diagnostic") {
    std::string bad = temp_file("bad.sdf", "f x = x + 1\ntop xs = os\n  where\n    os = map [2,2] f xs\n");
    RunResult r = run("check " + bad + " --entry top --shape 5");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("error") != std::string::npos);
    CHECK(r.out.find("sums to 4") != std::string::npos);
}

TEST_CASE("missing file exits with the usage code") {
    RunResult r = run("check /nonexistent/nothing.sdf --entry x");
    CHECK(r.exit_code == 2);
}

TEST_CASE("diagnostics carry file, line and column") {
    std::string bad = temp_file("syntax.sdf", "f x = x +\n");
    RunResult r = run("check " + bad + " --entry f");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("syntax.sdf:1:") != std::string::npos);
}

TEST_CASE("graph writes DOT and JSON files") {
    std::string dot = temp_file("g.dot", ""), json = temp_file("g.json", "");
    RunResult r = run("graph " + corpus("map3f.sdf") + " --entry g --dot " + dot + " --json " +
                      json);
    CHECK(r.exit_code == 0);
    std::string dtext = slurp(dot);
    CHECK(dtext.find("digraph") != std::string::npos);
    CHECK(dtext.find("cluster_") != std::string::npos);
    auto j = nlohmann::json::parse(slurp(json));
    CHECK(j.contains("nodes"));
    CHECK(j.contains("edges"));
    CHECK(j.contains("hierarchy"));
}

TEST_CASE("graph JSON is byte-identical across runs") {
    std::string j1 = temp_file("g1.json", ""), j2 = temp_file("g2.json", "");
    CHECK(run("graph " + corpus("com.sdf") + " --entry com --json " + j1).exit_code == 0);
    CHECK(run("graph " + corpus("com.sdf") + " --entry com --json " + j2).exit_code == 0);
    CHECK(slurp(j1) == slurp(j2));
}

TEST_CASE("analyze prints the resource table") {
    RunResult r = run("analyze " + corpus("cube.sdf") + " --entry cube364");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("DSPs") != std::string::npos);
    CHECK(r.out.find("72") != std::string::npos);
    RunResult rj = run("analyze " + corpus("maps.sdf") + " --entry maps1111 --format json");
    auto j = nlohmann::json::parse(rj.out);
    CHECK(j["dsp_count"] == 1);
    CHECK(j["latency_cycles"] == 768);
}

TEST_CASE("sim prints the output value and latency") {
    std::string in = temp_file("cin.json", "[1,2,3]");
    RunResult r = run("sim " + corpus("c_node.sdf") + " --entry c --input " + in);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("[6,6]") != std::string::npos);
    CHECK(r.out.find("latency: 1 cycles") != std::string::npos);
}

TEST_CASE("sim writes traces") {
    std::string in = temp_file("cin2.json", "[1,2,3]");
    std::string tr = temp_file("c.trace", ""), tt = temp_file("c.wave", "");
    RunResult r = run("sim " + corpus("c_node.sdf") + " --entry c --input " + in + " --trace " +
                      tr + " --trace-text " + tt);
    CHECK(r.exit_code == 0);
    std::string lines = slurp(tr);
    CHECK(lines.find("\"cycle\":0") != std::string::npos);
    CHECK(slurp(tt).find("t=0") != std::string::npos);
}

TEST_CASE("sim traces are byte-identical across runs") {
    std::string in = temp_file("pin.json", "[[1,2,3],[4,5,6],[7,8,9],[1,1,1],[2,2,2],[3,3,3]]");
    std::string t1 = temp_file("p1.trace", ""), t2 = temp_file("p2.trace", "");
    CHECK(run("sim " + corpus("compose.sdf") + " --entry pipeline --input " + in + " --trace " +
              t1)
              .exit_code == 0);
    CHECK(run("sim " + corpus("compose.sdf") + " --entry pipeline --input " + in + " --trace " +
              t2)
              .exit_code == 0);
    CHECK(slurp(t1) == slurp(t2));
}

TEST_CASE("clamped capacities make sim exit with the fault code") {
    std::string in = temp_file("pin2.json", "[[1,2,3],[4,5,6],[7,8,9],[1,1,1],[2,2,2],[3,3,3]]");
    RunResult r = run("sim " + corpus("compose.sdf") + " --entry pipeline --input " + in +
                      " --clamp-capacity 1");
    CHECK(r.exit_code == 3);
    CHECK(r.out.find("overflow") != std::string::npos);
}

TEST_CASE("sim rejects ambiguous input flags") {
    RunResult r = run("sim " + corpus("c_node.sdf") + " --entry c");
    CHECK(r.exit_code == 2);
}

TEST_CASE("verify passes on the center-of-mass program") {
    RunResult r = run("verify " + corpus("com.sdf") +
                      " --entry coms --random 3 --seed 7 --range 0:255");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("3/3 passed") != std::string::npos);
}

TEST_CASE("verify rejects a zero random count") {
    RunResult r = run("verify " + corpus("com.sdf") + " --entry com --random 0");
    CHECK(r.exit_code == 2);
}

TEST_CASE("verify reports divergence for a corrupted design") {
    // A debug clamp makes the buffered design fault: verification fails with
    // a nonzero exit and names the problem.
    std::string in = temp_file("cin3.json", "[1,2,3]");
    RunResult r = run("sim " + corpus("c_node.sdf") + " --entry c --input " + in +
                      " --clamp-capacity 0");
    CHECK(r.exit_code == 3);
}

TEST_CASE("conservative mode flag changes latency, not outputs") {
    std::string in = temp_file("m1111.json", "");
    {
        std::ostringstream ss;
        ss << "[";
        for (int i = 0; i < 6; ++i) {
            if (i) ss << ",";
            ss << "[";
            for (int j = 0; j < 8; ++j) {
                if (j) ss << ",";
                ss << "[[1,2,3,4],[5,6,7,8],[1,1,1,1],[2,2,2,2]]";
            }
            ss << "]";
        }
        ss << "]";
        std::ofstream out(in);
        out << ss.str();
    }
    RunResult eager = run("sim " + corpus("maps.sdf") + " --entry maps1111 --input " + in);
    RunResult cons =
        run("sim " + corpus("maps.sdf") + " --entry maps1111 --input " + in + " --mode conservative");
    CHECK(eager.exit_code == 0);
    CHECK(cons.exit_code == 0);
    CHECK(eager.out.find("latency: 768 cycles") != std::string::npos);
    auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
    CHECK(first_line(eager.out) == first_line(cons.out));
}
