#include "idsbench/idsbench.h"

#include "idsbench/bench.hpp"
#include "idsbench/error.hpp"
#include "idsbench/learners.hpp"
#include "idsbench/superlearner.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <variant>

using nlohmann::json;

struct ids_dataset {
    ids::TabularDataset data;
};

struct ids_model {
    std::variant<ids::TrainedModel, ids::SuperLearnerModel> model;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ids_status guarded(F&& fn) {
    try {
        fn();
        g_last_error.clear();
        return IDS_OK;
    } catch (const ids::Error& e) {
        g_last_error = e.what();
        return static_cast<ids_status>(static_cast<int>(e.code()));
    } catch (const json::exception& e) {
        g_last_error = std::string("InvalidJson: ") + e.what();
        return IDS_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "OutOfMemory";
        return IDS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = std::string("Internal: ") + e.what();
        return IDS_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) ids::fail(ids::ErrorCode::InvalidArgument, "NullArgument", std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ids::ScenarioSchema schema_for(const char* scenario, const char* schema_path) {
    if (schema_path && *schema_path) {
        ids::ScenarioSchema s = ids::read_schema_file(schema_path);
        if (s.id.empty() && scenario) s.id = scenario;
        return s;
    }
    require(scenario, "scenario");
    return ids::builtin_schema(scenario);
}

json parse_or_null(const char* text) { return text && *text ? json::parse(text) : json(nullptr); }

} // namespace

extern "C" {

const char* ids_version(void) { return ids::version().data(); }

const char* ids_last_error(void) { return g_last_error.c_str(); }

void ids_string_free(char* s) { std::free(s); }

ids_status ids_builtin_schema(const char* scenario, char** schema_json) {
    return guarded([&] {
        require(scenario, "scenario");
        require(schema_json, "schema_json");
        *schema_json = dup(ids::schema_to_json(ids::builtin_schema(scenario)).dump(2));
    });
}

ids_status ids_dataset_load(const char* data_path, const char* scenario, const char* schema_path, ids_dataset** out) {
    return guarded([&] {
        require(data_path, "data_path");
        require(out, "out");
        *out = nullptr;
        auto ds = std::make_unique<ids_dataset>();
        ds->data = ids::load_csv(data_path, schema_for(scenario, schema_path));
        *out = ds.release();
    });
}

void ids_dataset_free(ids_dataset* ds) { delete ds; }

ids_status ids_dataset_rows(const ids_dataset* ds, size_t* rows) {
    return guarded([&] {
        require(ds, "dataset");
        require(rows, "rows");
        *rows = ds->data.n_rows;
    });
}

ids_status ids_dataset_summary(const ids_dataset* ds, char** summary_json) {
    return guarded([&] {
        require(ds, "dataset");
        require(summary_json, "summary_json");
        *summary_json = dup(ids::summary_to_json(ids::summarize(ds->data)).dump(2));
    });
}

ids_status ids_inspect_data(const char* data_path, const char* scenario, const char* schema_path, int expect_counts,
                            char** report_text, int* counts_ok) {
    return guarded([&] {
        require(data_path, "data_path");
        require(report_text, "report_text");
        const auto report = ids::inspect_data(data_path, schema_for(scenario, schema_path), expect_counts != 0);
        std::string text = report.text;
        for (const auto& m : report.mismatches) text += "count mismatch: " + m + "\n";
        *report_text = dup(text);
        if (counts_ok) *counts_ok = report.ok() ? 1 : 0;
    });
}

ids_status ids_resolve_config(const char* file_json, const char* flags_json, char** config_json) {
    return guarded([&] {
        require(config_json, "config_json");
        json file, flags;
        try {
            file = parse_or_null(file_json);
            flags = parse_or_null(flags_json);
        } catch (const json::parse_error& e) {
            ids::fail(ids::ErrorCode::Config, "InvalidConfig", e.what());
        }
        *config_json = dup(ids::config_to_json(ids::resolve_config(file, flags)).dump(2));
    });
}

ids_status ids_run_scenario(const char* config_json, size_t workers, char** results_json) {
    return guarded([&] {
        require(config_json, "config_json");
        json doc;
        try {
            doc = json::parse(config_json);
        } catch (const json::parse_error& e) {
            ids::fail(ids::ErrorCode::Config, "InvalidConfig", e.what());
        }
        const auto outcome = ids::run_scenario(ids::config_from_json(doc), workers);
        if (results_json) *results_json = dup(ids::results_to_json(outcome.table).dump(2) + "\n");
    });
}

ids_status ids_format_table(const char* results_json, char** table_text) {
    return guarded([&] {
        require(results_json, "results_json");
        require(table_text, "table_text");
        *table_text = dup(ids::format_table(ids::results_from_json(json::parse(results_json))));
    });
}

ids_status ids_plot(const char* in_dir) {
    return guarded([&] {
        require(in_dir, "in_dir");
        ids::plot(in_dir);
    });
}

ids_status ids_model_load(const char* model_json, ids_model** out) {
    return guarded([&] {
        require(model_json, "model_json");
        require(out, "out");
        *out = nullptr;
        const json doc = json::parse(model_json);
        auto m = std::make_unique<ids_model>();
        if (doc.value("format", std::string{}) == "idsbench.superlearner")
            m->model = ids::super_from_json(doc);
        else
            m->model = ids::model_from_json(doc);
        *out = m.release();
    });
}

void ids_model_free(ids_model* model) { delete model; }

ids_status ids_model_width(const ids_model* model, size_t* width) {
    return guarded([&] {
        require(model, "model");
        require(width, "width");
        if (const auto* t = std::get_if<ids::TrainedModel>(&model->model))
            *width = t->width;
        else
            *width = std::get<ids::SuperLearnerModel>(model->model).bases.at(0).width;
    });
}

ids_status ids_model_predict(const ids_model* model, const double* x, size_t rows, size_t cols, double* out) {
    return guarded([&] {
        require(model, "model");
        if (rows == 0) return;
        require(x, "x");
        require(out, "out");
        ids::Matrix m(rows, cols);
        std::memcpy(m.data.data(), x, rows * cols * sizeof(double));
        const std::vector<double> p = std::holds_alternative<ids::TrainedModel>(model->model)
                                          ? ids::predict_proba(std::get<ids::TrainedModel>(model->model), m)
                                          : ids::predict_super(std::get<ids::SuperLearnerModel>(model->model), m);
        std::memcpy(out, p.data(), p.size() * sizeof(double));
    });
}

ids_status ids_model_to_json(const ids_model* model, char** model_json) {
    return guarded([&] {
        require(model, "model");
        require(model_json, "model_json");
        const json doc = std::holds_alternative<ids::TrainedModel>(model->model)
                             ? ids::model_to_json(std::get<ids::TrainedModel>(model->model))
                             : ids::super_to_json(std::get<ids::SuperLearnerModel>(model->model));
        *model_json = dup(doc.dump());
    });
}

ids_status ids_evaluate(const double* scores, const uint8_t* labels, size_t n, char** report_json) {
    return guarded([&] {
        require(report_json, "report_json");
        if (n > 0) {
            require(scores, "scores");
            require(labels, "labels");
        }
        const auto r = ids::evaluate(std::span<const double>(scores, n), std::span<const std::uint8_t>(labels, n), "scores");
        *report_json = dup(ids::report_to_json(r).dump(2));
    });
}

} // extern "C"
