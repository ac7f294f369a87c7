#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "i2v_test_cli";

struct Run {
    int code;
    std::string output;
};

Run run(const std::string& args) {
    const fs::path log = kWork / "out.txt";
    const std::string cmd = std::string(I2V_BINARY) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::size_t count_files(const fs::path& dir, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().starts_with(prefix)) ++n;
    return n;
}

}  // namespace

TEST_CASE("help and usage errors") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const Run help = run("--help");
    CHECK(help.code == 0);
    CHECK(help.output.find("generate") != std::string::npos);
    CHECK(run("train --help").code == 0);
    CHECK(run("dance").code == 2);
    CHECK(run("generate --bogus-flag 1").code == 2);
    CHECK(run("synth-data").code == 2);

    const Run missing = run("train --manifest /nonexistent/manifest.txt --config /nonexistent/cfg.json --out " +
                            (kWork / "ck").string());
    CHECK(missing.code != 0);
    CHECK(missing.output.find("error:") != std::string::npos);
}

TEST_CASE("synthesize, train, generate, evaluate") {
    fs::create_directories(kWork);
    const fs::path data = kWork / "data", ck = kWork / "ck", frames = kWork / "frames";
    fs::remove_all(data);
    fs::remove_all(ck);
    fs::remove_all(frames);

    REQUIRE(run("synth-data --out " + data.string() + " --subjects 2 --frames 4 --emotions happy,sad --size 64")
                .code == 0);
    REQUIRE(fs::exists(data / "manifest.txt"));

    const Run tr = run("train --manifest " + (data / "manifest.txt").string() + " --out " + ck.string() +
                       " --preset desk --max-steps 2 --checkpoint-every 2");
    INFO(tr.output);
    REQUIRE(tr.code == 0);
    CHECK(fs::exists(ck / "step_00000002.ckpt"));
    CHECK(fs::exists(ck / "train_log.jsonl"));

    const std::string image = (data / "subject_00_happy" / "frame_0001.png").string();
    REQUIRE(fs::exists(image));
    const Run gen = run("generate --checkpoint " + (ck / "step_00000002.ckpt").string() + " --image " + image +
                        " --out " + frames.string() + " --linear sad:10 --frames-only");
    INFO(gen.output);
    CHECK(gen.code == 0);
    CHECK(count_files(frames, "frame_") == 10);
    CHECK(fs::exists(frames / "video.json"));

    const Run bad = run("generate --checkpoint " + (ck / "step_00000002.ckpt").string() + " --image " + image +
                        " --out " + frames.string() + " --linear bored:10 --frames-only");
    CHECK(bad.code == 1);
    CHECK(bad.output.find("unknown emotion name") != std::string::npos);

    const Run ev = run("evaluate --checkpoint " + (ck / "step_00000002.ckpt").string() + " --image " + image +
                       " --out " + (kWork / "curve.csv").string() + " --linear happy:10");
    INFO(ev.output);
    CHECK(ev.code == 0);
    CHECK(fs::exists(kWork / "curve.csv"));
    CHECK(fs::exists(kWork / "curve.svg"));
}
