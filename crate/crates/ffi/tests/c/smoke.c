#include <stdio.h>
#include "elastinet.h"

int main(void) {
    ElnNetwork *net = NULL;
    if (eln_network_from_scenario("triod-perturbed", 32, 0.2, -1.0, &net) != ELN_OK) {
        fprintf(stderr, "%s\n", eln_last_error());
        return 1;
    }
    double e0 = 0.0, e1 = 0.0;
    eln_network_energy(net, &e0);
    ElnNetwork *next = NULL;
    if (eln_step(net, 1e-4, &next) != ELN_OK) {
        fprintf(stderr, "%s\n", eln_last_error());
        return 1;
    }
    eln_network_energy(next, &e1);
    ElnNetwork *bad = NULL;
    int status = eln_network_from_json("{", &bad);
    printf("%d %d\n", e1 < e0, status == ELN_ERR_PARSE);
    eln_network_free(next);
    eln_network_free(net);
    return 0;
}
