#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>

// Prints one pass/fail line per acceptance criterion as it completes.
namespace {

struct CriterionLine : doctest::IReporter {
  const doctest::TestCaseData* current = nullptr;
  int executed = 0;
  int failed = 0;

  explicit CriterionLine(const doctest::ContextOptions&) {}

  void report_query(const doctest::QueryData&) override {}
  void test_run_start() override {}
  void test_run_end(const doctest::TestRunStats&) override {
    std::printf("%s: %d of %d criteria passed\n",
                failed == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                executed - failed, executed);
    std::fflush(stdout);
  }
  void test_case_start(const doctest::TestCaseData& data) override { current = &data; }
  void test_case_reenter(const doctest::TestCaseData& data) override { current = &data; }
  void test_case_end(const doctest::CurrentTestCaseStats& stats) override {
    if (current != nullptr) {
      ++executed;
      if (!stats.testCaseSuccess) ++failed;
      std::printf("[%s] %s (%.1fs)\n", stats.testCaseSuccess ? "PASS" : "FAIL",
                  current->m_name, stats.seconds);
      std::fflush(stdout);
    }
    current = nullptr;
  }
  void test_case_exception(const doctest::TestCaseException&) override {}
  void subcase_start(const doctest::SubcaseSignature&) override {}
  void subcase_end() override {}
  void log_assert(const doctest::AssertData&) override {}
  void log_message(const doctest::MessageData&) override {}
  void test_case_skipped(const doctest::TestCaseData&) override {}
};

}  // namespace

REGISTER_LISTENER("criterion_lines", 1, CriterionLine);

int main(int argc, char** argv) {
  doctest::Context context;
  context.applyCommandLine(argc, argv);
  return context.run();
}
