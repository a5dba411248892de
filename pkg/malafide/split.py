import numpy as np
from sklearn.model_selection import BaseCrossValidator


class AttackBalancedSplit(BaseCrossValidator):
    """
    Split utterances into k folds so that every fold holds an equal share of each group type.

    Groups ~ utterances.
    Group types ~ spoofing attacks (or speakers, for bona fide audio).

    With n_splits=2 the two test folds are the attacker-side Part 1 and Part 2.

    Args:
        n_splits (int): Number of folds. Must be at least 2.
    """

    def __init__(self, n_splits=2):
        if n_splits < 2:
            raise ValueError("n_splits must be at least 2")
        self.n_splits = n_splits

    def fold_assignments(self, groups, group_types) -> np.ndarray:
        """
        Deal the groups of each type round-robin into folds, in order of appearance.

        Returns:
            np.ndarray: Fold index of every row.
        """
        if groups is None or group_types is None:
            raise ValueError(
                "The 'groups' and 'group_types' parameters must not be None"
            )

        groups = np.asarray(groups)
        group_types = np.asarray(group_types)
        if groups.shape != group_types.shape:
            raise ValueError("'groups' and 'group_types' must have the same length")

        fold_assignments = np.full(len(groups), -1)

        _, first_type_idx = np.unique(group_types, return_index=True)
        for group_type in group_types[np.sort(first_type_idx)]:
            type_indices = np.flatnonzero(group_types == group_type)
            _, first_group_idx = np.unique(groups[type_indices], return_index=True)
            type_groups = groups[type_indices][np.sort(first_group_idx)]

            fold = 0
            for group in type_groups:
                group_indices = np.flatnonzero(groups == group)
                fold_assignments[group_indices] = fold
                fold = (fold + 1) % self.n_splits

        return fold_assignments

    def split(self, X, y=None, groups=None, group_types=None):
        fold_assignments = self.fold_assignments(groups, group_types)
        if len(fold_assignments) != len(X):
            raise ValueError("'X' and 'groups' must have the same length")

        for fold in range(self.n_splits):
            test_idx = np.flatnonzero(fold_assignments == fold)
            train_idx = np.flatnonzero(fold_assignments != fold)
            yield train_idx, test_idx

    def get_n_splits(self, X=None, y=None, groups=None, group_types=None):
        return self.n_splits
