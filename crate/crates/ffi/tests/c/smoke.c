#include <stdio.h>
#include <stdlib.h>
#include "expressdyn.h"

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke MODEL SCORE\n");
        return 2;
    }
    EdModel *model = NULL;
    if (ed_model_load(argv[1], &model) != ED_STATUS_OK) {
        fprintf(stderr, "load: %s\n", ed_last_error());
        return 1;
    }
    size_t n = 0;
    if (ed_model_predict(model, argv[2], NULL, 0, &n) != ED_STATUS_BUFFER_TOO_SMALL) {
        return 1;
    }
    double *y = malloc(n * sizeof *y);
    if (ed_model_predict(model, argv[2], y, n, &n) != ED_STATUS_OK) {
        return 1;
    }
    EdGraph *graph = NULL;
    if (ed_sensitivity(model, argv[2], &graph) != ED_STATUS_OK) {
        fprintf(stderr, "sensitivity: %s\n", ed_last_error());
        return 1;
    }
    printf("%zu %zu %zu %s\n", n, ed_graph_steps(graph), ed_graph_columns(graph), ed_graph_column_name(graph, 0));
    free(y);
    ed_graph_free(graph);
    ed_model_free(model);
    return 0;
}
