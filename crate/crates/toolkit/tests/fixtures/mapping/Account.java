package bank;

import java.util.List;

public class Account {
    private int balance;

    public Account(int start) {
        balance = start;
    }

    // adds money
    public void deposit(int amount) {
        balance += amount;
    }

    public int total() {
        return balance;
    }
}
